#pragma once

// Predictive latent marginals, class probabilities and test metrics.

#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgvi/common.hpp"
#include "pgvi/kernel.hpp"
#include "pgvi/model.hpp"

namespace pgvi {

struct PredictiveMarginal {
  double mu_star = 0.0;
  double var_star = 0.0;
  double p_pos = 0.5;
};

/// Gauss-Hermite rule for the weight exp(-t^2): sum_i w_i g(t_i) ~ int g(t) exp(-t^2) dt.
struct GaussHermite {
  Vector nodes;
  Vector weights;
};

/// Golub-Welsch nodes and weights; cached per order. Throws ConfigError for q < 1.
const GaussHermite& gauss_hermite(int q);

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz) for Im z > 0, by Weideman's
/// rational approximation with 48 terms.
std::complex<double> faddeeva(std::complex<double> z);

/// E[sigmoid(f)] for f ~ N(mu, var). The first three pole pairs of the
/// logistic function are integrated exactly through the Faddeeva function
/// and the smooth remainder with a q-node Gauss-Hermite rule. var = 0 gives
/// sigmoid(mu).
double class_prob(double mu, double var, int q = 20);

/// Predictions from a state snapshot. Caches K_mm^{-1} mu and
/// K_mm^{-1} Sigma K_mm^{-1} - K_mm^{-1} so each point costs O(m^2).
class Predictor {
 public:
  explicit Predictor(const VariationalState& state, int quad_order = 20);

  /// Latent mean and variance at the rows of x (raw features; the state's
  /// standardizer is applied when present).
  void latent(const Matrix& x, Vector& mu_star, Vector& var_star) const;

  std::vector<PredictiveMarginal> predict(const Matrix& x) const;
  PredictiveMarginal predict_one(std::span<const double> x) const;

  int quad_order() const { return quad_order_; }

 private:
  Matrix z_;
  KernelParams params_;
  std::optional<Standardizer> standardizer_;
  double jitter_ = 0.0;
  Vector alpha_;  // K_mm^{-1} mu
  Matrix beta_;   // K_mm^{-1} Sigma K_mm^{-1} - K_mm^{-1}
  int quad_order_;
};

/// (mu_star, var_star) at one point. var_star = K_** + K_*m K_mm^{-1}(Sigma K_mm^{-1} - I) K_m*,
/// clamped below at 1e-12. K_** includes the jitter.
PredictiveMarginal latent_predict(const VariationalState& state, std::span<const double> x_star);

struct Metrics {
  double error = 0.0;
  double mean_nll = 0.0;
};

/// Error at threshold 1/2 and mean negative log predictive probability,
/// with probabilities floored at 1e-12. Throws ConfigError on empty input.
Metrics evaluate_probs(std::span<const double> p_pos, const Vector& y);
Metrics evaluate(const VariationalState& state, const Dataset& test, int quad_order = 20);

/// Prediction CSV: schema comment, header, one row per point.
void write_predictions_csv(const std::vector<PredictiveMarginal>& preds, const std::string& path);

}  // namespace pgvi
