#pragma once

// Full-GP Polya-Gamma Gibbs sampler used as ground truth for the variational
// approximation, and the per-point comparison against a variational state.

#include <string>
#include <vector>

#include "pgvi/common.hpp"
#include "pgvi/kernel.hpp"
#include "pgvi/model.hpp"

namespace pgvi {

struct GibbsOptions {
  int sweeps = 5000;
  int burn_in = 1000;
  int thin = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Post-burn-in latent draws together with running per-point summaries.
struct GibbsChain {
  std::vector<Vector> samples_f;
  int burn_in = 0;
  int thin = 1;
  std::uint64_t seed = 0;

  Vector mean() const;
  /// Sample variance with denominator (count - 1); zero for a single draw.
  Vector variance() const;
  /// Monte-Carlo estimate of E[sigmoid(f_i)].
  Vector prob_positive() const;
};

/// The two conditionals of the augmented full-GP posterior with prior
/// N(0, K + jitter I). Each call to draw_f costs one n x n Cholesky.
class GibbsSampler {
 public:
  GibbsSampler(const Dataset& data, const KernelParams& params);

  /// omega_i ~ PG(1, |f_i|).
  Vector draw_omega(const Vector& f, Rng& rng) const;

  /// f ~ N(S y / 2, S) with S = (K^{-1} + diag(omega))^{-1}, drawn pathwise:
  /// f = f0 + K W^{1/2} B^{-1} (y / (2 sqrt(omega)) - W^{1/2} f0 - e),
  /// B = I + W^{1/2} K W^{1/2}, f0 ~ N(0, K), e ~ N(0, I). Never inverts K.
  Vector draw_f(const Vector& omega, Rng& rng) const;

  /// Exact conditional moments, for tests: (S y / 2, S).
  void conditional_moments(const Vector& omega, Vector& mean, Matrix& cov) const;

  Eigen::Index size() const { return k_.rows(); }

 private:
  Matrix k_;
  Matrix chol_k_;
  Vector y_;
};

GibbsChain gibbs_run(const Dataset& data, const KernelParams& params, const GibbsOptions& opts);
GibbsChain gibbs_run(const Dataset& data, const KernelParams& params, int iters, int burn_in,
                     int thin, Rng& rng);

struct PointComparison {
  double mcmc_mean = 0.0;
  double mcmc_var = 0.0;
  double mcmc_ppos = 0.0;
  double vi_mean = 0.0;
  double vi_var = 0.0;
  double vi_ppos = 0.0;
};

struct SeriesAgreement {
  double pearson = 0.0;
  double mean_abs_diff = 0.0;
  double max_abs_diff = 0.0;
};

struct AgreementReport {
  std::vector<PointComparison> points;
  SeriesAgreement mean;
  SeriesAgreement var;
  SeriesAgreement ppos;

  /// Posterior-mean correlation above `min_corr` and mean absolute
  /// probability gap below `max_ppos_gap`.
  bool passes(double min_corr = 0.99, double max_ppos_gap = 0.05) const;
};

/// Pairs the chain's summaries at the training points with the predictive
/// marginals of a full-GP variational state (Z = X). Throws DataError when
/// the chain, state and dataset do not describe the same points.
AgreementReport compare_to_vi(const GibbsChain& chain, const Dataset& data,
                              const VariationalState& vi, int quad_order = 20);

/// Pearson correlation; 1 when both series are constant and equal, 0 when
/// exactly one is constant.
double pearson(const Vector& a, const Vector& b);

/// Columns: point_index, mcmc_mean, mcmc_var, mcmc_ppos, vi_mean, vi_var, vi_ppos.
void write_comparison_csv(const AgreementReport& report, const std::string& path);

}  // namespace pgvi
