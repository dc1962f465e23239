#include "pgvi/kernel.hpp"

#include <cmath>

namespace pgvi {

namespace {

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Matrix d = (-2.0 * a * b.transpose()).eval();
  d.colwise() += an;
  d.rowwise() += bn.transpose();
  return d.cwiseMax(0.0);
}

Matrix squared_distances_exact(const Matrix& a, const Matrix& b) {
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  return d;
}

// The expanded form loses precision for nearby points; small problems use
// the direct differences so that K(x, x) is exactly a^2.
Matrix pairwise_sq(const Matrix& a, const Matrix& b) {
  if (a.rows() * b.rows() <= 4096 || a.cols() <= 2) return squared_distances_exact(a, b);
  return squared_distances(a, b);
}

}  // namespace

double KernelParams::lengthscale() const { return std::exp(log_lengthscale); }
double KernelParams::variance() const { return std::exp(2.0 * log_amplitude); }
double KernelParams::jitter() const { return std::exp(log_jitter); }

void KernelParams::validate() const {
  if (!std::isfinite(log_lengthscale) || !std::isfinite(log_amplitude) ||
      !std::isfinite(log_jitter)) {
    throw ConfigError("kernel hyperparameters must be finite");
  }
}

Eigen::Vector3d KernelParams::as_vector() const {
  return {log_lengthscale, log_amplitude, log_jitter};
}

KernelParams KernelParams::from_vector(const Eigen::Vector3d& v) {
  return KernelParams{v[0], v[1], v[2]};
}

double kern(std::span<const double> x, std::span<const double> x2, const KernelParams& p,
            bool same_index) {
  if (x.size() != x2.size()) throw ConfigError("kern: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - x2[i];
    d2 += diff * diff;
  }
  const double l = p.lengthscale();
  double k = p.variance() * std::exp(-0.5 * d2 / (l * l));
  if (same_index) k += p.jitter();
  return k;
}

Matrix cross_covariance(const Matrix& a, const Matrix& b, const KernelParams& p) {
  if (a.cols() != b.cols()) throw ConfigError("cross_covariance: dimension mismatch");
  const double l = p.lengthscale();
  return (pairwise_sq(a, b).array() * (-0.5 / (l * l))).exp() * p.variance();
}

Matrix InducingCovariance::solve(const Matrix& b) const {
  return chol.triangularView<Eigen::Lower>().transpose().solve(
      chol.triangularView<Eigen::Lower>().solve(b));
}

std::shared_ptr<const InducingCovariance> factor_inducing(const Matrix& z, const KernelParams& p) {
  p.validate();
  if (z.rows() < 1) throw ConfigError("need at least one inducing point");
  const Matrix k = cross_covariance(z, z, p);
  const double base = p.jitter();
  double jitter = base;
  for (int attempt = 0; attempt <= 6; ++attempt, jitter *= 10.0) {
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(kj);
    if (llt.info() != Eigen::Success) continue;
    Matrix l = llt.matrixL();
    if ((l.diagonal().array() <= 0.0).any() || !l.allFinite()) continue;
    auto out = std::make_shared<InducingCovariance>();
    out->k_mm = std::move(kj);
    out->chol = std::move(l);
    out->jitter = jitter;
    out->log_det = 2.0 * out->chol.diagonal().array().log().sum();
    out->k_mm_inv = out->solve(Matrix::Identity(z.rows(), z.rows()));
    out->k_mm_inv = 0.5 * (out->k_mm_inv + out->k_mm_inv.transpose()).eval();
    return out;
  }
  throw NumericError("Cholesky of K_mm failed after jitter escalation to " +
                     std::to_string(base * 1e6) +
                     "; inducing inputs are ill-conditioned or hyperparameters degenerate");
}

GramBundle build_gram(const Matrix& x_batch, const Matrix& z, const KernelParams& p) {
  return build_gram(x_batch, z, p, factor_inducing(z, p));
}

GramBundle build_gram(const Matrix& x_batch, const Matrix& z, const KernelParams& p,
                      std::shared_ptr<const InducingCovariance> inducing) {
  GramBundle g;
  g.inducing = std::move(inducing);
  g.k_nm = cross_covariance(x_batch, z, p);
  g.k_diag = Vector::Constant(x_batch.rows(), p.variance() + g.inducing->jitter);
  // kappa = K_nm K_mm^{-1}, computed through the factor.
  g.kappa = g.inducing->solve(g.k_nm.transpose()).transpose();
  g.k_tilde = (g.k_diag - (g.kappa.array() * g.k_nm.array()).rowwise().sum().matrix())
                  .cwiseMax(0.0);
  return g;
}

KernelGradients kern_grad(const Matrix& x, const Matrix& z, const KernelParams& p, double jitter) {
  const double l = p.lengthscale();
  KernelGradients g;
  const Matrix dz = pairwise_sq(z, z);
  const Matrix dx = pairwise_sq(x, z);
  const Matrix kzz = (dz.array() * (-0.5 / (l * l))).exp() * p.variance();
  const Matrix kxz = (dx.array() * (-0.5 / (l * l))).exp() * p.variance();
  const auto m = z.rows();
  const auto n = x.rows();

  // d/dlog l of exp(-r^2 / (2 l^2)) = r^2 / l^2 * exp(...)
  g.d_k_mm[0] = (kzz.array() * dz.array() / (l * l)).matrix();
  g.d_k_nm[0] = (kxz.array() * dx.array() / (l * l)).matrix();
  g.d_k_diag[0] = Vector::Zero(n);

  g.d_k_mm[1] = 2.0 * kzz;
  g.d_k_nm[1] = 2.0 * kxz;
  g.d_k_diag[1] = Vector::Constant(n, 2.0 * p.variance());

  g.d_k_mm[2] = jitter * Matrix::Identity(m, m);
  g.d_k_nm[2] = Matrix::Zero(n, m);
  g.d_k_diag[2] = Vector::Constant(n, jitter);
  return g;
}

}  // namespace pgvi
