#pragma once

// Stochastic variational inference for the Polya-Gamma augmented sparse GP
// classifier: closed-form variational bound, coordinate-ascent local
// updates, natural-gradient global updates, learning-rate schedules,
// hyperparameter optimization and the training loop.

#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgvi/common.hpp"
#include "pgvi/data_io.hpp"
#include "pgvi/kernel.hpp"
#include "pgvi/model.hpp"

namespace pgvi {

enum class LrMode { kAdaptive, kFixed, kDecay };
enum class ConvMode { kParams, kHeldout };

struct TrainConfig {
  Eigen::Index num_inducing = 100;
  Eigen::Index batch_size = 100;
  int max_iters = 5000;

  ConvMode conv_mode = ConvMode::kParams;
  double conv_threshold = 1e-4;  ///< on the windowed relative change of (eta1, eta2)
  int conv_window = 5;
  double heldout_threshold = 1e-3;  ///< on the windowed relative change of held-out NLL
  int heldout_window = 5;
  int heldout_every = 10;

  LrMode lr_mode = LrMode::kAdaptive;
  double fixed_lr = 1.0;
  int burn_in = 10;  ///< minibatches used to seed the adaptive-rate statistics

  int hyper_every = 10;  ///< 0 disables hyperparameter optimization
  double adam_lr = 0.01;

  KernelParams initial_params;
  std::uint64_t seed = 0;
  bool trace_train_error = false;

  /// Throws ConfigError on invalid values for a dataset of size n.
  void validate(Eigen::Index n) const;
};

/// Local tilts c_i = sqrt(K~_ii + kappa_i Sigma kappa_i^T + (kappa_i mu)^2)
/// for every row of `gram`.
Vector local_tilts(const GramBundle& gram, const Vector& mu, const Matrix& sigma);

/// The variational bound for the rows in `gram`, with the data terms
/// multiplied by `scale`:
///   scale/2 * sum_i {y_i kappa_i mu - theta_i (K~_ii + kappa_i Sigma kappa_i^T
///                    + (kappa_i mu)^2) + c_i^2 theta_i - 2 log cosh(c_i/2)}
///   - KL(N(mu, Sigma) || N(0, K_mm)).
/// The -n log 2 term of the augmented likelihood is omitted.
double elbo_terms(const GramBundle& gram, std::span<const double> y, const Vector& mu,
                  const Matrix& sigma, double log_det_sigma, const Vector& c, double scale = 1.0);

/// Full-data bound for `state` using its current tilts.
double elbo(const VariationalState& state, const Dataset& data);

/// elbo() - n log 2: a proper lower bound on log p(y).
double elbo_lower_bound(const VariationalState& state, const Dataset& data);

/// Euclidean gradients of the bound with respect to mu and Sigma.
struct EuclideanGradient {
  Vector d_mu;
  Matrix d_sigma;
};

EuclideanGradient euclidean_gradient(const GramBundle& gram, std::span<const double> y,
                                     const Vector& mu, const Matrix& sigma_inv, const Vector& c,
                                     double scale = 1.0);

struct NaturalGradient {
  Vector g1;
  Matrix g2;

  Vector flatten() const;
};

/// Coordinate-ascent update of c_i for i in the batch. `gram` holds the
/// batch rows in batch order.
void local_update(VariationalState& state, const GramBundle& gram, const MiniBatch& batch);

/// Closed-form natural gradients from the batch:
///   g1 = scale/2 kappa_S^T y_S - eta1
///   G2 = -1/2 (K_mm^{-1} + scale kappa_S^T Theta_S kappa_S) - eta2
NaturalGradient natural_gradient(const VariationalState& state, const GramBundle& gram,
                                 std::span<const double> y_batch, std::span<const double> c_batch,
                                 double scale);

/// eta += rho * g, then refreshes (mu, Sigma). Requires 0 <= rho <= 1.
void global_step(VariationalState& state, const NaturalGradient& g, double rho);

/// Step-size schedule for the global updates. The adaptive mode keeps
/// moving averages of the flattened natural gradient and of its squared
/// norm with memory tau and sets rho = |g_bar|^2 / h, tau <- tau (1 - rho) + 1.
class LearningRate {
 public:
  explicit LearningRate(LrMode mode = LrMode::kAdaptive, double fixed_lr = 1.0);

  /// Accumulates a gradient evaluated before training starts. After the
  /// burn-in the averages hold the sample means and tau equals the count.
  void burn_in(const Vector& g);

  /// Returns the rate for the step that uses gradient `g`.
  double next(const Vector& g);

  double tau() const { return tau_; }
  int steps() const { return steps_; }

  static constexpr double kMinRate = 1e-6;

 private:
  LrMode mode_;
  double fixed_lr_;
  Vector g_bar_;
  double h_ = 0.0;
  double tau_ = 1.0;
  int burn_in_count_ = 0;
  int steps_ = 0;
};

struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  int t = 0;
};

/// Gradient of the bound with respect to (log l, log a, log jitter), holding
/// (mu, Sigma, c) fixed, over the given rows with data terms scaled by `scale`.
Eigen::Vector3d hyper_gradient(const VariationalState& state, const Dataset& data,
                               std::span<const Eigen::Index> rows, double scale);
Eigen::Vector3d hyper_gradient(const VariationalState& state, const Dataset& data);

/// One Adam ascent step on the log hyperparameters. If K_mm cannot be
/// factorized at the new values the step is reverted and the Adam rate halved.
/// Returns the new parameters (also stored in state.params).
KernelParams hyper_step(VariationalState& state, const Dataset& data, AdamState& adam,
                        std::span<const Eigen::Index> rows, double scale);
KernelParams hyper_step(VariationalState& state, const Dataset& data, AdamState& adam);

struct TraceRow {
  int iter = 0;
  double wall_seconds = 0.0;
  double elbo_estimate = 0.0;
  double rho = 0.0;
  std::optional<double> train_error;
};

struct FitResult {
  VariationalState state;
  std::vector<TraceRow> trace;
  bool converged = false;
  int iterations = 0;
};

/// Drives the alternating local/global updates. Owns the state exclusively.
class Trainer {
 public:
  using Clock = std::chrono::steady_clock;

  Trainer(const Dataset& data, TrainConfig config, VariationalState initial,
          Clock::time_point start = Clock::now());

  /// Runs the adaptive-rate burn-in (no-op for other modes).
  void burn_in();

  /// One iteration: sample batch, local update, natural gradient, rate,
  /// global step and (on schedule) a hyperparameter step.
  TraceRow step();

  /// Loops until convergence or max_iters. `heldout` is required for the
  /// held-out convergence mode.
  FitResult run(const Dataset* heldout = nullptr);

  bool converged() const { return converged_; }
  const VariationalState& state() const { return state_; }
  /// Relative change of (eta1, eta2) in the last step.
  double last_relative_change() const { return last_change_; }

 private:
  void refresh_inducing();
  MiniBatch next_batch();
  GramBundle batch_gram(const MiniBatch& batch) const;
  static bool windowed_below(std::vector<double>& window, double value, int size, double threshold);

  const Dataset& data_;
  TrainConfig config_;
  VariationalState state_;
  Clock::time_point start_;
  MiniBatchStream batches_;
  LearningRate rate_;
  AdamState adam_;
  std::shared_ptr<const InducingCovariance> inducing_;
  bool full_batch_ = false;
  GramBundle full_gram_;  ///< cached when the batch is the whole dataset
  std::vector<double> change_window_;
  double last_change_ = 0.0;
  int iter_ = 0;
  bool converged_ = false;
};

/// Initializes Z by k-means++ from config.seed and trains.
FitResult fit(const Dataset& data, const TrainConfig& config, const Dataset* heldout = nullptr);
/// Trains from a given initial state.
FitResult fit(const Dataset& data, const TrainConfig& config, VariationalState initial,
              const Dataset* heldout = nullptr);

/// Trace CSV: schema comment line, header, one row per iteration.
void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

/// The full-GP augmented bound and the Gibbs-MacKay product-of-bounds, both
/// for a fixed latent vector f:
///   augmented:    y^T f / 2 - f^T Theta f / 2 - n log 2 + sum(c_i^2 theta_i / 2 - log cosh(c_i / 2))
///   gibbs_mackay: sum log[sigma(c_i) exp((y_i f_i - c_i)/2 - (sigma(c_i) - 1/2)/(2 c_i) ((y_i f_i)^2 - c_i^2))]
struct BoundPair {
  double augmented = 0.0;
  double gibbs_mackay = 0.0;
};

BoundPair gibbs_mackay_bound(const Vector& f, const Vector& c, const Vector& y);

}  // namespace pgvi
