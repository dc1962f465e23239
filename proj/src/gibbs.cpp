#include "pgvi/gibbs.hpp"

#include <cmath>
#include <fstream>

#include "pgvi/pg_math.hpp"
#include "pgvi/prediction.hpp"

namespace pgvi {

namespace {

Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

SeriesAgreement agreement(const Vector& a, const Vector& b) {
  const Vector diff = (a - b).cwiseAbs();
  return {pearson(a, b), diff.mean(), diff.maxCoeff()};
}

}  // namespace

void GibbsOptions::validate() const {
  if (sweeps < 1 || burn_in < 0 || thin < 1) throw ConfigError("Gibbs: need sweeps >= 1, burn_in >= 0, thin >= 1");
  if (sweeps - burn_in < thin) throw ConfigError("Gibbs: no draws are kept after burn-in and thinning");
}

Vector GibbsChain::mean() const {
  if (samples_f.empty()) throw ConfigError("Gibbs chain is empty");
  Vector m = Vector::Zero(samples_f.front().size());
  for (const auto& f : samples_f) m += f;
  return m / static_cast<double>(samples_f.size());
}

Vector GibbsChain::variance() const {
  const Vector m = mean();
  Vector v = Vector::Zero(m.size());
  if (samples_f.size() < 2) return v;
  for (const auto& f : samples_f) v += (f - m).cwiseAbs2();
  return v / static_cast<double>(samples_f.size() - 1);
}

Vector GibbsChain::prob_positive() const {
  if (samples_f.empty()) throw ConfigError("Gibbs chain is empty");
  Vector p = Vector::Zero(samples_f.front().size());
  for (const auto& f : samples_f) {
    for (Eigen::Index i = 0; i < f.size(); ++i) p[i] += pg::sigmoid(f[i]);
  }
  return p / static_cast<double>(samples_f.size());
}

GibbsSampler::GibbsSampler(const Dataset& data, const KernelParams& params) : y_(data.y) {
  data.validate();
  // K + jitter I, with the same escalation as the inducing covariance.
  const auto factor = factor_inducing(data.x, params);
  k_ = factor->k_mm;
  chol_k_ = factor->chol;
}

Vector GibbsSampler::draw_omega(const Vector& f, Rng& rng) const {
  Vector omega(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) omega[i] = pg::pg_sample(std::abs(f[i]), rng);
  return omega;
}

Vector GibbsSampler::draw_f(const Vector& omega, Rng& rng) const {
  const Eigen::Index n = k_.rows();
  if (omega.size() != n) throw ConfigError("Gibbs: omega has the wrong size");
  const Vector sw = omega.cwiseSqrt();
  const Vector f0 = chol_k_.triangularView<Eigen::Lower>() * standard_normal(n, rng);
  const Vector r = (0.5 * y_.array() / sw.array() - sw.array() * f0.array()).matrix() - standard_normal(n, rng);
  Matrix b = sw.asDiagonal() * k_ * sw.asDiagonal();
  b.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(b);
  if (llt.info() != Eigen::Success) throw NumericError("Gibbs: Cholesky of I + W^1/2 K W^1/2 failed");
  const Vector v = llt.solve(r);
  return f0 + k_ * sw.cwiseProduct(v);
}

void GibbsSampler::conditional_moments(const Vector& omega, Vector& mean, Matrix& cov) const {
  const Vector sw = omega.cwiseSqrt();
  Matrix b = sw.asDiagonal() * k_ * sw.asDiagonal();
  b.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(b);
  if (llt.info() != Eigen::Success) throw NumericError("Gibbs: Cholesky of I + W^1/2 K W^1/2 failed");
  const Matrix ksw = k_ * sw.asDiagonal();
  cov = k_ - ksw * llt.solve(ksw.transpose());
  cov = 0.5 * (cov + cov.transpose()).eval();
  mean = 0.5 * cov * y_;
}

GibbsChain gibbs_run(const Dataset& data, const KernelParams& params, const GibbsOptions& opts) {
  Rng rng(opts.seed);
  GibbsChain chain = gibbs_run(data, params, opts.sweeps, opts.burn_in, opts.thin, rng);
  chain.seed = opts.seed;
  return chain;
}

GibbsChain gibbs_run(const Dataset& data, const KernelParams& params, int iters, int burn_in,
                     int thin, Rng& rng) {
  GibbsOptions opts{iters, burn_in, thin, 0};
  opts.validate();
  const GibbsSampler sampler(data, params);
  GibbsChain chain;
  chain.burn_in = burn_in;
  chain.thin = thin;
  Vector f = Vector::Zero(data.size());
  for (int sweep = 1; sweep <= iters; ++sweep) {
    const Vector omega = sampler.draw_omega(f, rng);
    f = sampler.draw_f(omega, rng);
    if (!f.allFinite()) throw NumericError("Gibbs: non-finite draw at sweep " + std::to_string(sweep));
    if (sweep > burn_in && (sweep - burn_in) % thin == 0) chain.samples_f.push_back(f);
  }
  return chain;
}

double pearson(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() == 0) throw ConfigError("pearson: size mismatch");
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  const double na = da.norm();
  const double nb = db.norm();
  if (na == 0.0 && nb == 0.0) return a == b ? 1.0 : 0.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return da.dot(db) / (na * nb);
}

bool AgreementReport::passes(double min_corr, double max_ppos_gap) const {
  return mean.pearson > min_corr && ppos.mean_abs_diff < max_ppos_gap;
}

AgreementReport compare_to_vi(const GibbsChain& chain, const Dataset& data,
                              const VariationalState& vi, int quad_order) {
  const Eigen::Index n = data.size();
  if (chain.samples_f.empty() || chain.samples_f.front().size() != n) {
    throw DataError("Gibbs chain and dataset describe different numbers of points");
  }
  if (vi.z.rows() != n || vi.z.cols() != data.dim() || vi.standardizer) {
    throw DataError("variational state is not a full-GP fit on this dataset (Z must equal X)");
  }
  if (!(vi.z - data.x).isZero(0.0)) throw DataError("variational state inducing inputs differ from X");

  const Vector m = chain.mean();
  const Vector v = chain.variance();
  const Vector p = chain.prob_positive();
  Vector vi_mu;
  Vector vi_var;
  Predictor(vi, quad_order).latent(data.x, vi_mu, vi_var);

  AgreementReport report;
  report.points.resize(static_cast<std::size_t>(n));
  Vector vi_p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    vi_p[i] = class_prob(vi_mu[i], vi_var[i], quad_order);
    report.points[static_cast<std::size_t>(i)] = {m[i], v[i], p[i], vi_mu[i], vi_var[i], vi_p[i]};
  }
  report.mean = agreement(m, vi_mu);
  report.var = agreement(v, vi_var);
  report.ppos = agreement(p, vi_p);
  return report;
}

void write_comparison_csv(const AgreementReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write comparison: " + path);
  out << "# schema: pgvi.gibbs_comparison v1\n";
  out << "point_index,mcmc_mean,mcmc_var,mcmc_ppos,vi_mean,vi_var,vi_ppos\n";
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    const auto& p = report.points[i];
    out << i << ',' << format_double(p.mcmc_mean) << ',' << format_double(p.mcmc_var) << ','
        << format_double(p.mcmc_ppos) << ',' << format_double(p.vi_mean) << ','
        << format_double(p.vi_var) << ',' << format_double(p.vi_ppos) << '\n';
  }
}

}  // namespace pgvi
