#include "pgvi/pg_math.hpp"

#include <cmath>
#include <numbers>

namespace pgvi::pg {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;
constexpr double kTruncRecip = 1.0 / kTrunc;

double log_norm_cdf(double x) {
  if (x > -30.0) {
    return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  }
  // Asymptotic expansion of the Mills ratio.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

double exponential(Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  return e(rng);
}

double uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

// n-th coefficient of the alternating series for the J*(1, 0) density,
// piecewise in x around the truncation point.
double series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) {
    return k * std::exp(-0.5 * k * k * x);
  }
  if (x > 0.0) {
    const double e = -1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) -
                     2.0 * (n + 0.5) * (n + 0.5) / x;
    return std::exp(e);
  }
  return 0.0;
}

// Probability of proposing from the truncated exponential piece.
double exponential_mass(double z) {
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double root = std::sqrt(1.0 / kTrunc);
  const double b = root * (kTrunc * z - 1.0);
  const double a = -root * (kTrunc * z + 1.0);
  const double x0 = std::log(fz) + fz * kTrunc;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);
  const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + q_over_p);
}

// Inverse-Gaussian(1/z, 1) draw truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, Rng& rng) {
  double x = kTrunc + 1.0;
  if (kTruncRecip > z) {
    double alpha = 0.0;
    while (uniform(rng) > alpha) {
      double e1 = exponential(rng);
      double e2 = exponential(rng);
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = exponential(rng);
        e2 = exponential(rng);
      }
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
    return x;
  }
  const double mu = 1.0 / z;
  std::normal_distribution<double> normal(0.0, 1.0);
  while (x > kTrunc) {
    double y = normal(rng);
    y *= y;
    const double half_mu = 0.5 * mu;
    const double mu_y = mu * y;
    x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
    if (uniform(rng) > mu / (mu + x)) x = mu * mu / x;
  }
  return x;
}

}  // namespace

PgTilt::PgTilt(double shape, double tilt) : shape_(shape), tilt_(std::abs(tilt)) {
  if (!(shape > 0.0)) throw ConfigError("PG shape must be positive");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double theta(double c) {
  c = std::abs(c);
  if (c < 1e-4) {
    const double c2 = c * c;
    return 0.25 - c2 / 48.0 + c2 * c2 / 480.0;
  }
  return std::tanh(0.5 * c) / (2.0 * c);
}

double theta_derivative(double c) {
  const double a = std::abs(c);
  const double sign = c < 0.0 ? -1.0 : 1.0;
  if (a < 1e-4) return sign * (-a / 24.0 + a * a * a / 120.0);
  const double t = std::tanh(0.5 * a);
  return sign * ((1.0 - t * t) / (4.0 * a) - t / (2.0 * a * a));
}

double pg_mean(double b, double c) {
  if (!(b > 0.0)) throw ConfigError("PG shape must be positive");
  return b * theta(c);
}

double pg_mean(const PgTilt& t) { return t.shape() * theta(t.tilt()); }

double pg_kl_term(double c) {
  const double half = 0.5 * std::abs(c);
  return log_cosh(half) - 0.5 * half * std::tanh(half);
}

double pg_sample(double c, Rng& rng) {
  // Sample J*(1, z) with z = |c| / 2, then PG(1, c) = J*(1, z) / 4.
  const double z = 0.5 * std::abs(c);
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double p_exp = exponential_mass(z);
  for (;;) {
    double x;
    if (uniform(rng) < p_exp) {
      x = kTrunc + exponential(rng) / fz;
    } else {
      x = truncated_inverse_gaussian(z, rng);
    }
    double s = series_coef(0, x);
    const double y = uniform(rng) * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

double pg_sample_gamma_sum(double c, Rng& rng, int terms) {
  if (terms < 1) throw ConfigError("gamma-sum sampler needs at least one term");
  const double c2 = c * c / (4.0 * kPi * kPi);
  double draw = 0.0;
  double kept_mean = 0.0;
  for (int k = 1; k <= terms; ++k) {
    const double h = k - 0.5;
    const double w = 1.0 / (2.0 * kPi * kPi * (h * h + c2));
    draw += w * exponential(rng);
    kept_mean += w;
  }
  return draw + (theta(c) - kept_mean);
}

}  // namespace pgvi::pg
