#include "pgvi/inference.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "pgvi/pg_math.hpp"
#include "pgvi/prediction.hpp"

namespace pgvi {

namespace {

constexpr double kChangeEps = 1e-12;

std::vector<double> gather(const Vector& v, std::span<const Eigen::Index> rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v[rows[i]];
  return out;
}

Matrix gather_rows(const Matrix& x, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Vector theta_vector(std::span<const double> c) {
  Vector t(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) t[static_cast<Eigen::Index>(i)] = pg::theta(c[i]);
  return t;
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double gaussian_kl(const InducingCovariance& k, const Vector& mu, const Matrix& sigma,
                   double log_det_sigma) {
  const double trace = (k.k_mm_inv.array() * sigma.array()).sum();
  const double quad = mu.dot(k.k_mm_inv * mu);
  return 0.5 * (trace + quad - static_cast<double>(mu.size()) + k.log_det - log_det_sigma);
}

// Sum over rows of kappa_i Sigma kappa_i^T.
Vector row_quadratic(const Matrix& kappa, const Matrix& sigma) {
  return ((kappa * sigma).array() * kappa.array()).rowwise().sum().matrix();
}

}  // namespace

void TrainConfig::validate(Eigen::Index n) const {
  if (num_inducing < 1 || num_inducing > n) throw ConfigError("num_inducing must be in [1, n]");
  if (batch_size < 1 || batch_size > n) throw ConfigError("batch_size must be in [1, n]");
  if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  if (!(conv_threshold > 0.0) || !(heldout_threshold > 0.0)) {
    throw ConfigError("convergence thresholds must be positive");
  }
  if (conv_window < 1 || heldout_window < 1 || heldout_every < 1) {
    throw ConfigError("convergence windows must be at least 1");
  }
  if (!(fixed_lr > 0.0 && fixed_lr <= 1.0)) throw ConfigError("fixed learning rate must be in (0, 1]");
  if (burn_in < 0) throw ConfigError("burn_in must be nonnegative");
  if (hyper_every < 0) throw ConfigError("hyper_every must be nonnegative");
  if (!(adam_lr >= 0.0)) throw ConfigError("adam_lr must be nonnegative");
  initial_params.validate();
}

Vector local_tilts(const GramBundle& gram, const Vector& mu, const Matrix& sigma) {
  const Vector km = gram.kappa * mu;
  const Vector radicand = gram.k_tilde + row_quadratic(gram.kappa, sigma) + km.cwiseAbs2();
  return radicand.cwiseMax(0.0).cwiseSqrt();
}

double elbo_terms(const GramBundle& gram, std::span<const double> y, const Vector& mu,
                  const Matrix& sigma, double log_det_sigma, const Vector& c, double scale) {
  const Eigen::Index s = gram.rows();
  if (static_cast<Eigen::Index>(y.size()) != s || c.size() != s) {
    throw ConfigError("elbo: batch sizes of Gram rows, labels and tilts differ");
  }
  const Vector km = gram.kappa * mu;
  const Vector ksk = row_quadratic(gram.kappa, sigma);
  double data = 0.0;
  for (Eigen::Index i = 0; i < s; ++i) {
    const double th = pg::theta(c[i]);
    data += y[static_cast<std::size_t>(i)] * km[i] - th * (gram.k_tilde[i] + ksk[i] + km[i] * km[i]) +
            c[i] * c[i] * th - 2.0 * pg::log_cosh(0.5 * c[i]);
  }
  return 0.5 * scale * data - gaussian_kl(*gram.inducing, mu, sigma, log_det_sigma);
}

double elbo(const VariationalState& state, const Dataset& data) {
  const GramBundle gram = build_gram(data.x, state.z, state.params);
  return elbo_terms(gram, as_span(data.y), state.mu(), state.sigma(), state.log_det_sigma(), state.c);
}

double elbo_lower_bound(const VariationalState& state, const Dataset& data) {
  return elbo(state, data) - static_cast<double>(data.size()) * std::numbers::ln2;
}

EuclideanGradient euclidean_gradient(const GramBundle& gram, std::span<const double> y,
                                     const Vector& mu, const Matrix& sigma_inv, const Vector& c,
                                     double scale) {
  const Vector th = theta_vector(as_span(c));
  const Vector yv = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  const Matrix ktk = gram.kappa.transpose() * th.asDiagonal() * gram.kappa;
  const Matrix& a = gram.inducing->k_mm_inv;
  EuclideanGradient g;
  g.d_mu = -(a + scale * ktk) * mu + 0.5 * scale * gram.kappa.transpose() * yv;
  g.d_sigma = 0.5 * (sigma_inv - a - scale * ktk);
  return g;
}

Vector NaturalGradient::flatten() const {
  Vector out(g1.size() + g2.size());
  out << g1, Eigen::Map<const Vector>(g2.data(), g2.size());
  return out;
}

void local_update(VariationalState& state, const GramBundle& gram, const MiniBatch& batch) {
  if (static_cast<Eigen::Index>(batch.indices.size()) != gram.rows()) {
    throw ConfigError("local_update: batch and Gram rows differ");
  }
  const Vector c = local_tilts(gram, state.mu(), state.sigma());
  for (std::size_t i = 0; i < batch.indices.size(); ++i) state.c[batch.indices[i]] = c[static_cast<Eigen::Index>(i)];
}

NaturalGradient natural_gradient(const VariationalState& state, const GramBundle& gram,
                                 std::span<const double> y_batch, std::span<const double> c_batch,
                                 double scale) {
  if (static_cast<Eigen::Index>(y_batch.size()) != gram.rows() || y_batch.size() != c_batch.size()) {
    throw ConfigError("natural_gradient: batch sizes differ");
  }
  const Vector th = theta_vector(c_batch);
  const Vector yv = Eigen::Map<const Vector>(y_batch.data(), static_cast<Eigen::Index>(y_batch.size()));
  NaturalGradient g;
  g.g1 = 0.5 * scale * gram.kappa.transpose() * yv - state.eta1();
  Matrix ktk = gram.kappa.transpose() * th.asDiagonal() * gram.kappa;
  g.g2 = -0.5 * (gram.inducing->k_mm_inv + scale * ktk) - state.eta2();
  g.g2 = 0.5 * (g.g2 + g.g2.transpose()).eval();
  return g;
}

void global_step(VariationalState& state, const NaturalGradient& g, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("learning rate must be in [0, 1]");
  if (rho == 0.0) return;
  state.set_natural(state.eta1() + rho * g.g1, state.eta2() + rho * g.g2);
}

LearningRate::LearningRate(LrMode mode, double fixed_lr) : mode_(mode), fixed_lr_(fixed_lr) {
  if (!(fixed_lr > 0.0 && fixed_lr <= 1.0)) throw ConfigError("fixed learning rate must be in (0, 1]");
}

void LearningRate::burn_in(const Vector& g) {
  ++burn_in_count_;
  if (burn_in_count_ == 1) {
    g_bar_ = g;
    h_ = g.squaredNorm();
  } else {
    const double w = 1.0 / burn_in_count_;
    g_bar_ += w * (g - g_bar_);
    h_ += w * (g.squaredNorm() - h_);
  }
  tau_ = burn_in_count_;
}

double LearningRate::next(const Vector& g) {
  ++steps_;
  switch (mode_) {
    case LrMode::kFixed:
      return fixed_lr_;
    case LrMode::kDecay:
      return std::pow(static_cast<double>(steps_), -0.7);
    case LrMode::kAdaptive:
      break;
  }
  if (g_bar_.size() == 0) {
    g_bar_ = Vector::Zero(g.size());
    h_ = 0.0;
    tau_ = 1.0;
  }
  const double w = 1.0 / tau_;
  g_bar_ = (1.0 - w) * g_bar_ + w * g;
  h_ = (1.0 - w) * h_ + w * g.squaredNorm();
  double rho = h_ > 0.0 ? g_bar_.squaredNorm() / h_ : 1.0;
  rho = std::clamp(rho, kMinRate, 1.0);
  tau_ = tau_ * (1.0 - rho) + 1.0;
  return rho;
}

Eigen::Vector3d hyper_gradient(const VariationalState& state, const Dataset& data,
                               std::span<const Eigen::Index> rows, double scale) {
  const Matrix x = gather_rows(data.x, rows);
  const std::vector<double> y = gather(data.y, rows);
  const std::vector<double> c = gather(state.c, rows);
  const GramBundle gram = build_gram(x, state.z, state.params);
  const InducingCovariance& ind = *gram.inducing;
  const Matrix& a = ind.k_mm_inv;
  const Matrix& kappa = gram.kappa;
  const Vector& mu = state.mu();
  const Matrix& sigma = state.sigma();
  const Vector th = theta_vector(c);
  const Vector yv = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  const Vector km = kappa * mu;

  // Gradient w.r.t. kappa with K~ held fixed, then chained through kappa = K_nm A.
  const Matrix g_kappa = yv * mu.transpose() - 2.0 * th.asDiagonal() * (kappa * sigma) -
                         2.0 * (th.array() * km.array()).matrix() * mu.transpose();
  const Matrix p = g_kappa * a;
  const Matrix th_kappa = th.asDiagonal() * kappa;
  const Vector a_mu = a * mu;
  const Matrix g_kmm = 0.5 * (-a + a * sigma * a + a_mu * a_mu.transpose()) +
                       0.5 * scale * (-kappa.transpose() * p - kappa.transpose() * th_kappa);
  const Matrix g_knm = 0.5 * scale * (p + 2.0 * th_kappa);
  const Vector g_kdiag = -0.5 * scale * th;

  const KernelGradients dk = kern_grad(x, state.z, state.params, ind.jitter);
  Eigen::Vector3d out;
  for (int j = 0; j < KernelParams::kCount; ++j) {
    out[j] = (g_kmm.array() * dk.d_k_mm[j].array()).sum() + (g_knm.array() * dk.d_k_nm[j].array()).sum() +
             g_kdiag.dot(dk.d_k_diag[j]);
  }
  return out;
}

Eigen::Vector3d hyper_gradient(const VariationalState& state, const Dataset& data) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.size()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return hyper_gradient(state, data, rows, 1.0);
}

KernelParams hyper_step(VariationalState& state, const Dataset& data, AdamState& adam,
                        std::span<const Eigen::Index> rows, double scale) {
  const Eigen::Vector3d g = hyper_gradient(state, data, rows, scale);
  const KernelParams old = state.params;
  const AdamState saved = adam;
  ++adam.t;
  adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * g;
  adam.v = adam.beta2 * adam.v + (1.0 - adam.beta2) * g.cwiseAbs2();
  const Eigen::Vector3d m_hat = adam.m / (1.0 - std::pow(adam.beta1, adam.t));
  const Eigen::Vector3d v_hat = adam.v / (1.0 - std::pow(adam.beta2, adam.t));
  const Eigen::Vector3d step = adam.lr * m_hat.array() / (v_hat.array().sqrt() + adam.eps);
  const KernelParams next = KernelParams::from_vector(old.as_vector() + step);
  try {
    next.validate();
    factor_inducing(state.z, next);
  } catch (const Error&) {
    adam = saved;
    adam.lr *= 0.5;
    return old;
  }
  state.params = next;
  return next;
}

KernelParams hyper_step(VariationalState& state, const Dataset& data, AdamState& adam) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.size()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return hyper_step(state, data, adam, rows, 1.0);
}

Trainer::Trainer(const Dataset& data, TrainConfig config, VariationalState initial,
                 Clock::time_point start)
    : data_(data), config_(std::move(config)), state_(std::move(initial)), start_(start) {
  config_.validate(data_.size());
  if (state_.c.size() != data_.size()) throw ConfigError("state and dataset differ in size");
  if (state_.z.cols() != data_.dim()) throw ConfigError("state and dataset differ in dimension");
  batches_ = MiniBatchStream(data_.size(), config_.batch_size, config_.seed);
  rate_ = LearningRate(config_.lr_mode, config_.fixed_lr);
  adam_.lr = config_.adam_lr;
  full_batch_ = config_.batch_size == data_.size();
  refresh_inducing();
}

void Trainer::refresh_inducing() {
  inducing_ = factor_inducing(state_.z, state_.params);
  if (full_batch_) full_gram_ = build_gram(data_.x, state_.z, state_.params, inducing_);
}

MiniBatch Trainer::next_batch() {
  return full_batch_ ? MiniBatch::full(data_.size()) : batches_.next();
}

GramBundle Trainer::batch_gram(const MiniBatch& batch) const {
  if (full_batch_) return full_gram_;
  return build_gram(gather_rows(data_.x, batch.indices), state_.z, state_.params, inducing_);
}

void Trainer::burn_in() {
  if (config_.lr_mode != LrMode::kAdaptive) return;
  for (int k = 0; k < config_.burn_in; ++k) {
    const MiniBatch batch = next_batch();
    const GramBundle gram = batch_gram(batch);
    const Vector c = local_tilts(gram, state_.mu(), state_.sigma());
    const NaturalGradient g =
        natural_gradient(state_, gram, gather(data_.y, batch.indices), as_span(c), batch.scale);
    rate_.burn_in(g.flatten());
  }
}

TraceRow Trainer::step() {
  const MiniBatch batch = next_batch();
  const GramBundle gram = batch_gram(batch);
  local_update(state_, gram, batch);
  const std::vector<double> y = gather(data_.y, batch.indices);
  const std::vector<double> c_batch = gather(state_.c, batch.indices);
  const Vector c = Eigen::Map<const Vector>(c_batch.data(), static_cast<Eigen::Index>(c_batch.size()));
  const NaturalGradient g = natural_gradient(state_, gram, y, as_span(c), batch.scale);
  const double rho = rate_.next(g.flatten());
  const double norm = std::sqrt(state_.eta1().squaredNorm() + state_.eta2().squaredNorm());
  const double delta = rho * std::sqrt(g.g1.squaredNorm() + g.g2.squaredNorm());
  global_step(state_, g, rho);
  last_change_ = delta / (norm + kChangeEps);
  ++iter_;

  TraceRow row;
  row.iter = iter_;
  row.rho = rho;
  row.elbo_estimate = elbo_terms(gram, y, state_.mu(), state_.sigma(), state_.log_det_sigma(), c, batch.scale);

  if (config_.hyper_every > 0 && iter_ % config_.hyper_every == 0) {
    const KernelParams before = state_.params;
    hyper_step(state_, data_, adam_, batch.indices, batch.scale);
    if (!(state_.params == before)) refresh_inducing();
  }
  if (config_.trace_train_error) {
    const Vector mu_f = build_gram(data_.x, state_.z, state_.params, inducing_).kappa * state_.mu();
    double wrong = 0.0;
    for (Eigen::Index i = 0; i < data_.size(); ++i) {
      if ((mu_f[i] > 0.0 ? 1.0 : -1.0) != data_.y[i]) wrong += 1.0;
    }
    row.train_error = wrong / static_cast<double>(data_.size());
  }
  row.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
  return row;
}

bool Trainer::windowed_below(std::vector<double>& window, double value, int size, double threshold) {
  window.push_back(value);
  if (static_cast<int>(window.size()) < size) return false;
  const double avg = std::accumulate(window.end() - size, window.end(), 0.0) / size;
  return avg < threshold;
}

FitResult Trainer::run(const Dataset* heldout) {
  if (config_.conv_mode == ConvMode::kHeldout && heldout == nullptr) {
    throw ConfigError("held-out convergence needs a held-out set");
  }
  FitResult result;
  try {
    burn_in();
    std::optional<double> prev_nll;
    while (iter_ < config_.max_iters && !converged_) {
      result.trace.push_back(step());
      if (config_.conv_mode == ConvMode::kParams) {
        converged_ = windowed_below(change_window_, last_change_, config_.conv_window, config_.conv_threshold);
      } else if (iter_ % config_.heldout_every == 0) {
        const double nll = evaluate(state_, *heldout).mean_nll;
        if (prev_nll) {
          const double rel = std::abs(nll - *prev_nll) / (std::abs(*prev_nll) + kChangeEps);
          converged_ = windowed_below(change_window_, rel, config_.heldout_window, config_.heldout_threshold);
        }
        prev_nll = nll;
      }
    }
  } catch (const NumericError& e) {
    throw NumericError("iteration " + std::to_string(iter_ + 1) + ": " + e.what());
  }
  result.state = state_;
  result.converged = converged_;
  result.iterations = iter_;
  return result;
}

FitResult fit(const Dataset& data, const TrainConfig& config, const Dataset* heldout) {
  const auto start = Trainer::Clock::now();
  config.validate(data.size());
  Rng rng(config.seed);
  VariationalState initial = init_state(data, config.num_inducing, config.initial_params, rng);
  initial.seed = config.seed;
  Trainer trainer(data, config, std::move(initial), start);
  return trainer.run(heldout);
}

FitResult fit(const Dataset& data, const TrainConfig& config, VariationalState initial,
              const Dataset* heldout) {
  Trainer trainer(data, config, std::move(initial));
  return trainer.run(heldout);
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trace: " + path);
  out << "# schema: pgvi.trace v1\n";
  out << "iter,wall_seconds,elbo_estimate,rho,train_error\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << format_double(r.wall_seconds) << ',' << format_double(r.elbo_estimate) << ','
        << format_double(r.rho) << ',';
    if (r.train_error) out << format_double(*r.train_error);
    out << '\n';
  }
}

BoundPair gibbs_mackay_bound(const Vector& f, const Vector& c, const Vector& y) {
  if (f.size() != c.size() || f.size() != y.size()) throw ConfigError("gibbs_mackay_bound: size mismatch");
  BoundPair out;
  const double n = static_cast<double>(f.size());
  out.augmented = -n * std::numbers::ln2;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double ci = std::abs(c[i]);
    const double th = pg::theta(ci);
    const double yf = y[i] * f[i];
    out.augmented += 0.5 * y[i] * f[i] - 0.5 * th * f[i] * f[i] + 0.5 * ci * ci * th - pg::log_cosh(0.5 * ci);
    // (sigma(c) - 1/2) / (2c), with its limit 1/8 at c = 0.
    const double slope = ci > 1e-8 ? (pg::sigmoid(ci) - 0.5) / (2.0 * ci) : 0.125;
    out.gibbs_mackay += pg::log_sigmoid(ci) + 0.5 * (yf - ci) - slope * (yf * yf - ci * ci);
  }
  return out;
}

}  // namespace pgvi
