#pragma once

// Polya-Gamma primitives: moments of the tilted class PG(b, c), the
// per-coordinate KL divergence KL(PG(1,c) || PG(1,0)), and samplers.

#include "pgvi/common.hpp"

namespace pgvi::pg {

/// Tilted Polya-Gamma parameters. The tilt is stored as |c| since
/// PG(b, c) and PG(b, -c) are the same distribution.
class PgTilt {
 public:
  PgTilt(double shape, double tilt);

  double shape() const { return shape_; }
  double tilt() const { return tilt_; }

 private:
  double shape_;
  double tilt_;
};

/// Logistic function 1 / (1 + exp(-z)), overflow-free for large |z|.
double sigmoid(double z);

/// log(sigmoid(z)) without underflow for very negative z.
double log_sigmoid(double z);

/// log(cosh(x)) computed as |x| + log1p(exp(-2|x|)) - log 2.
double log_cosh(double x);

/// E[omega] for omega ~ PG(b, c), i.e. b / (2c) * tanh(c / 2); b / 4 at c = 0.
/// Throws ConfigError for b <= 0.
double pg_mean(double b, double c);
double pg_mean(const PgTilt& t);

/// theta(c) = tanh(c/2) / (2c), the mean of PG(1, c). Uses a Taylor series
/// for |c| < 1e-4.
double theta(double c);

/// d theta / d c, needed by the local-parameter derivative checks.
double theta_derivative(double c);

/// KL(PG(1, c) || PG(1, 0)) = log cosh(c/2) - (c/4) tanh(c/2).
double pg_kl_term(double c);

/// Exact draw from PG(1, c) using Devroye's alternating-series
/// accept/reject scheme (truncation point 0.64).
double pg_sample(double c, Rng& rng);

/// Approximate draw from PG(1, c) as a truncated weighted sum of `terms`
/// Exp(1) variables, with the mean of the discarded tail added back as a
/// constant. Used to cross-check the exact sampler.
double pg_sample_gamma_sum(double c, Rng& rng, int terms = 200);

}  // namespace pgvi::pg
