#pragma once

#include <cmath>
#include <random>

#include "pgvi/inference.hpp"
#include "pgvi/model.hpp"

namespace pgvi::test {

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
  }
  return m;
}

inline Matrix random_spd(Eigen::Index m, Rng& rng, double ridge = 0.3) {
  const Matrix a = random_matrix(m, m, rng, 0.5);
  return a * a.transpose() + ridge * Matrix::Identity(m, m);
}

inline Dataset random_dataset(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Dataset data;
  data.x = random_matrix(n, d, rng);
  data.y.resize(n);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index i = 0; i < n; ++i) data.y[i] = coin(rng) ? 1.0 : -1.0;
  return data;
}

/// Two Gaussian blobs centred at (+-sep, 0, ...), labelled +-1.
inline Dataset blobs(Eigen::Index n, Eigen::Index d, double sep, Rng& rng) {
  Dataset data;
  data.x = random_matrix(n, d, rng, 0.5);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.y[i] = i % 2 == 0 ? 1.0 : -1.0;
    data.x(i, 0) += data.y[i] * sep;
  }
  return data;
}

/// A state with random (mu, Sigma), random hyperparameters around the
/// defaults and tilts that are not at their optimum.
inline VariationalState random_state(const Dataset& data, Eigen::Index m, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  KernelParams p{u(rng), u(rng), std::log(1e-2)};
  VariationalState s = init_state(data, data.x.topRows(m), p);
  s.set_moments(random_matrix(m, 1, rng), random_spd(m, rng));
  std::uniform_real_distribution<double> cu(0.2, 2.0);
  for (Eigen::Index i = 0; i < s.c.size(); ++i) s.c[i] = cu(rng);
  return s;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace pgvi::test
