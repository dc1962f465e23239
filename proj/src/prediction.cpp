#include "pgvi/prediction.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

#include "pgvi/pg_math.hpp"

namespace pgvi {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kWeidemanTerms = 48;
constexpr int kPoleTerms = 3;
constexpr double kVarFloor = 1e-12;
constexpr double kProbFloor = 1e-12;

struct Weideman {
  double l = 0.0;
  std::array<double, kWeidemanTerms> a{};  // a[j] multiplies Z^j
};

Weideman make_weideman() {
  constexpr int n = kWeidemanTerms;
  constexpr int m = 2 * n;
  constexpr int m2 = 2 * m;
  Weideman w;
  w.l = std::sqrt(n / std::numbers::sqrt2);
  std::vector<double> f(m2, 0.0);
  for (int k = -m + 1; k <= m - 1; ++k) {
    const double t = w.l * std::tan(0.5 * k * kPi / m);
    f[static_cast<std::size_t>(k + m)] = std::exp(-t * t) * (w.l * w.l + t * t);
  }
  // Real part of the DFT of the half-shifted samples.
  for (int j = 1; j <= n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m2; ++i) {
      const double fi = f[static_cast<std::size_t>((i + m) % m2)];
      acc += fi * std::cos(2.0 * kPi * j * i / m2);
    }
    w.a[static_cast<std::size_t>(j - 1)] = acc / m2;
  }
  return w;
}

const Weideman& weideman() {
  static const Weideman w = make_weideman();
  return w;
}

// Remainder of the logistic function after removing the first pole pairs:
// sigmoid(f) - 1/2 - sum_k 2 f / (f^2 + ((2k+1) pi)^2).
double logistic_remainder(double f) {
  double r = 0.5 * std::tanh(0.5 * f);
  for (int k = 0; k < kPoleTerms; ++k) {
    const double a = (2 * k + 1) * kPi;
    r -= 2.0 * f / (f * f + a * a);
  }
  return r;
}

}  // namespace

std::complex<double> faddeeva(std::complex<double> z) {
  const auto& w = weideman();
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> denom = w.l - i * z;
  const std::complex<double> zz = (w.l + i * z) / denom;
  std::complex<double> p = 0.0;
  for (int j = kWeidemanTerms - 1; j >= 0; --j) p = p * zz + w.a[static_cast<std::size_t>(j)];
  return 2.0 * p / (denom * denom) + (1.0 / std::sqrt(kPi)) / denom;
}

const GaussHermite& gauss_hermite(int q) {
  if (q < 1) throw ConfigError("quadrature order must be at least 1");
  static std::mutex mutex;
  static std::map<int, GaussHermite> cache;
  std::lock_guard<std::mutex> lock(mutex);
  if (auto it = cache.find(q); it != cache.end()) return it->second;
  Matrix jacobi = Matrix::Zero(q, q);
  for (int k = 1; k < q; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  GaussHermite rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = std::sqrt(kPi) * eig.eigenvectors().row(0).transpose().array().square();
  return cache.emplace(q, std::move(rule)).first->second;
}

double class_prob(double mu, double var, int q) {
  if (!(var > 0.0)) return pg::sigmoid(mu);
  const double s = std::sqrt(var);
  const double scale = s * std::numbers::sqrt2;
  double p = 0.5;
  // E[2f / (f^2 + a^2)] = 2 Re E[1 / (f - ia)] = -2 sqrt(pi) Im w(zeta) / (s sqrt 2).
  for (int k = 0; k < kPoleTerms; ++k) {
    const double a = (2 * k + 1) * kPi;
    const std::complex<double> zeta(-mu / scale, a / scale);
    p -= 2.0 * std::sqrt(kPi) * faddeeva(zeta).imag() / scale;
  }
  const auto& rule = gauss_hermite(q);
  double rem = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    rem += rule.weights[i] * logistic_remainder(mu + scale * rule.nodes[i]);
  }
  p += rem / std::sqrt(kPi);
  return std::clamp(p, 0.0, 1.0);
}

Predictor::Predictor(const VariationalState& state, int quad_order)
    : z_(state.z), params_(state.params), standardizer_(state.standardizer), quad_order_(quad_order) {
  if (quad_order < 1) throw ConfigError("quadrature order must be at least 1");
  const auto inducing = factor_inducing(z_, params_);
  jitter_ = inducing->jitter;
  alpha_ = inducing->solve(state.mu());
  beta_ = inducing->solve(inducing->solve(state.sigma()).transpose()) - inducing->k_mm_inv;
  beta_ = 0.5 * (beta_ + beta_.transpose()).eval();
}

void Predictor::latent(const Matrix& x, Vector& mu_star, Vector& var_star) const {
  if (x.cols() != z_.cols()) throw ConfigError("test points and model differ in dimension");
  const Matrix k_sm = standardizer_ ? cross_covariance(standardizer_->apply(x), z_, params_)
                                    : cross_covariance(x, z_, params_);
  mu_star = k_sm * alpha_;
  var_star = ((k_sm * beta_).array() * k_sm.array()).rowwise().sum().matrix();
  var_star.array() += params_.variance() + jitter_;
  var_star = var_star.cwiseMax(kVarFloor);
}

std::vector<PredictiveMarginal> Predictor::predict(const Matrix& x) const {
  Vector mu;
  Vector var;
  latent(x, mu, var);
  std::vector<PredictiveMarginal> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = {mu[i], var[i], class_prob(mu[i], var[i], quad_order_)};
  }
  return out;
}

PredictiveMarginal Predictor::predict_one(std::span<const double> x) const {
  const Matrix row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return predict(row).front();
}

PredictiveMarginal latent_predict(const VariationalState& state, std::span<const double> x_star) {
  return Predictor(state).predict_one(x_star);
}

Metrics evaluate_probs(std::span<const double> p_pos, const Vector& y) {
  if (p_pos.empty()) throw ConfigError("cannot evaluate on an empty test set");
  if (static_cast<Eigen::Index>(p_pos.size()) != y.size()) {
    throw ConfigError("probabilities and labels differ in count");
  }
  Metrics m;
  for (std::size_t i = 0; i < p_pos.size(); ++i) {
    const double p = p_pos[i];
    const double yi = y[static_cast<Eigen::Index>(i)];
    const double sign = p > 0.5 ? 1.0 : (p < 0.5 ? -1.0 : 0.0);
    if (sign != yi) m.error += 1.0;
    m.mean_nll -= std::log(std::max(yi > 0 ? p : 1.0 - p, kProbFloor));
  }
  m.error /= static_cast<double>(p_pos.size());
  m.mean_nll /= static_cast<double>(p_pos.size());
  return m;
}

Metrics evaluate(const VariationalState& state, const Dataset& test, int quad_order) {
  if (test.size() == 0) throw ConfigError("cannot evaluate on an empty test set");
  const auto preds = Predictor(state, quad_order).predict(test.x);
  std::vector<double> p(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) p[i] = preds[i].p_pos;
  return evaluate_probs(p, test.y);
}

void write_predictions_csv(const std::vector<PredictiveMarginal>& preds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions: " + path);
  out << "# schema: pgvi.predictions v1\n";
  out << "index,mu_star,var_star,p_pos,predicted_label\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    const int label = p.p_pos > 0.5 ? 1 : (p.p_pos < 0.5 ? -1 : 0);
    out << i << ',' << format_double(p.mu_star) << ',' << format_double(p.var_star) << ','
        << format_double(p.p_pos) << ',' << label << '\n';
  }
}

}  // namespace pgvi
