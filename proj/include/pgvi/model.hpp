#pragma once

// Sparse variational model state: q(u) = N(mu, Sigma) stored canonically in
// natural parameters (eta1, eta2), local Polya-Gamma tilts c, inducing inputs
// Z and kernel hyperparameters.

#include <optional>
#include <string>

#include "pgvi/common.hpp"
#include "pgvi/kernel.hpp"

namespace pgvi {

/// Binary classification data: X is n x d, labels are exactly -1 or +1.
struct Dataset {
  Matrix x;
  Vector y;

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }

  /// Throws DataError on NaN/Inf features, shape mismatch or labels not in {-1,+1}.
  void validate() const;

  Dataset subset(std::span<const Eigen::Index> rows) const;
};

/// Per-feature affine transform learned on training data.
struct Standardizer {
  Vector means;
  Vector stds;  ///< 1 for constant columns

  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& x) const;
};

class VariationalState {
 public:
  VariationalState() = default;

  /// Prior initialization: eta1 = 0, eta2 = -K_mm^{-1} / 2, c = 0.
  VariationalState(Matrix z, KernelParams params, Eigen::Index n_data);

  const Vector& eta1() const { return eta1_; }
  const Matrix& eta2() const { return eta2_; }
  const Vector& mu() const { return mu_; }
  const Matrix& sigma() const { return sigma_; }
  /// log |Sigma|, from the Cholesky factor of -2 eta2.
  double log_det_sigma() const { return log_det_sigma_; }

  /// Replaces the natural parameters and refreshes (mu, Sigma). Throws
  /// NumericError when -2 eta2 is not positive definite.
  void set_natural(Vector eta1, Matrix eta2);
  /// Sets (mu, Sigma) and the matching natural parameters.
  void set_moments(const Vector& mu, const Matrix& sigma);

  Vector c;  ///< local tilts, one per training point, all >= 0
  Matrix z;  ///< m x d inducing inputs
  KernelParams params;
  std::uint64_t seed = 0;
  /// Optional feature transform applied before prediction.
  std::optional<Standardizer> standardizer;

  Eigen::Index num_inducing() const { return z.rows(); }

 private:
  Vector eta1_;
  Matrix eta2_;
  Vector mu_;
  Matrix sigma_;
  double log_det_sigma_ = 0.0;
};

/// k-means++ seeding followed by 10 Lloyd iterations. Deterministic given
/// the generator state. Throws ConfigError unless 1 <= m <= n.
Matrix kmeanspp_init(const Matrix& x, Eigen::Index m, Rng& rng, int lloyd_iters = 10);

/// Chooses Z by k-means++ and initializes q(u) to the prior. The local tilts
/// are set by one local update over all points.
VariationalState init_state(const Dataset& data, Eigen::Index m, const KernelParams& params,
                            Rng& rng);
/// Same with explicit inducing inputs.
VariationalState init_state(const Dataset& data, Matrix z, const KernelParams& params);

/// Checkpoint file: versioned JSON with Z, hyperparameters, eta1, eta2, the
/// local tilts, the seed and an optional standardizer. Doubles are written
/// in shortest round-trip form so reloading is bit-exact.
void save_checkpoint(const VariationalState& state, const std::string& path);
VariationalState load_checkpoint(const std::string& path);

std::string checkpoint_to_json(const VariationalState& state);
VariationalState checkpoint_from_json(const std::string& text);

}  // namespace pgvi
