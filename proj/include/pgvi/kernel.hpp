#pragma once

// Squared-exponential kernel with a shared lengthscale, an amplitude and a
// white-noise (jitter) term, plus the Gram-matrix bundle used by the sparse
// variational model.

#include <array>
#include <memory>
#include <span>

#include "pgvi/common.hpp"

namespace pgvi {

/// Kernel hyperparameters, all stored in log space.
struct KernelParams {
  double log_lengthscale = 0.0;
  double log_amplitude = 0.0;
  double log_jitter = -9.210340371976182;  // log(1e-4)

  static constexpr int kCount = 3;

  double lengthscale() const;
  /// a^2, the signal variance.
  double variance() const;
  double jitter() const;

  /// Throws ConfigError when any value is non-finite.
  void validate() const;

  Eigen::Vector3d as_vector() const;
  static KernelParams from_vector(const Eigen::Vector3d& v);

  bool operator==(const KernelParams&) const = default;
};

/// k(x, x') = a^2 exp(-|x - x'|^2 / (2 l^2)), plus the jitter when the two
/// arguments are the same point by index.
double kern(std::span<const double> x, std::span<const double> x2, const KernelParams& p,
            bool same_index = false);

/// Cross-covariance between the rows of `a` and the rows of `b` (no jitter).
Matrix cross_covariance(const Matrix& a, const Matrix& b, const KernelParams& p);

/// Factorized inducing covariance K_mm + jitter * I. Immutable once built and
/// shared read-only between Gram bundles.
struct InducingCovariance {
  Matrix k_mm;       ///< includes the effective jitter on the diagonal
  Matrix chol;       ///< lower Cholesky factor of k_mm
  Matrix k_mm_inv;
  double log_det = 0.0;
  double jitter = 0.0;  ///< effective jitter after escalation

  /// Solves K_mm x = b.
  Matrix solve(const Matrix& b) const;
};

/// Builds and factorizes K_mm. On factorization failure the jitter is
/// multiplied by 10, up to 1e6 times the configured value, before giving up
/// with NumericError.
std::shared_ptr<const InducingCovariance> factor_inducing(const Matrix& z, const KernelParams& p);

/// Kernel quantities for a set of rows of X against the inducing inputs.
struct GramBundle {
  std::shared_ptr<const InducingCovariance> inducing;
  Matrix k_nm;     ///< rows x m cross-covariance
  Vector k_diag;   ///< prior variances a^2 + jitter
  Matrix kappa;    ///< K_nm K_mm^{-1}
  Vector k_tilde;  ///< K_ii - K_im K_mm^{-1} K_mi, clamped at 0

  Eigen::Index rows() const { return k_nm.rows(); }
};

GramBundle build_gram(const Matrix& x_batch, const Matrix& z, const KernelParams& p);
GramBundle build_gram(const Matrix& x_batch, const Matrix& z, const KernelParams& p,
                      std::shared_ptr<const InducingCovariance> inducing);

/// Derivatives of the Gram quantities with respect to each log hyperparameter,
/// in the order (log_lengthscale, log_amplitude, log_jitter).
struct KernelGradients {
  std::array<Matrix, KernelParams::kCount> d_k_mm;
  std::array<Matrix, KernelParams::kCount> d_k_nm;
  std::array<Vector, KernelParams::kCount> d_k_diag;
};

/// `jitter` is the effective jitter that was used in K_mm and k_diag.
KernelGradients kern_grad(const Matrix& x, const Matrix& z, const KernelParams& p, double jitter);

}  // namespace pgvi
