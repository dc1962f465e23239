#include "pgvi/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "pgvi/inference.hpp"

namespace pgvi {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointSchema = "pgvi.checkpoint";

using nlohmann::json;

json to_json_vec(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json_mat(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[j] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

Vector vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix mat_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = n ? static_cast<Eigen::Index>(rows[0].size()) : cols_if_empty;
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d) throw DataError("checkpoint: ragged matrix");
    for (Eigen::Index k = 0; k < d; ++k) m(i, k) = rows[i][k];
  }
  return m;
}

}  // namespace

void Dataset::validate() const {
  if (x.rows() != y.size()) throw DataError("dataset: feature rows and labels differ in count");
  if (!x.allFinite()) throw DataError("dataset: features contain NaN or Inf");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 1.0 && y[i] != -1.0) throw DataError("dataset: labels must be -1 or +1");
  }
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    out.y[static_cast<Eigen::Index>(i)] = y[rows[i]];
  }
  return out;
}

Matrix Standardizer::apply(const Matrix& x) const {
  return ((x.rowwise() - means.transpose()).array().rowwise() / stds.transpose().array()).matrix();
}

Matrix Standardizer::invert(const Matrix& x) const {
  return ((x.array().rowwise() * stds.transpose().array()).rowwise() + means.transpose().array())
      .matrix();
}

VariationalState::VariationalState(Matrix z_in, KernelParams p, Eigen::Index n_data)
    : c(Vector::Zero(n_data)), z(std::move(z_in)), params(p) {
  const auto inducing = factor_inducing(z, params);
  set_natural(Vector::Zero(z.rows()), -0.5 * inducing->k_mm_inv);
}

void VariationalState::set_natural(Vector eta1, Matrix eta2) {
  if (eta1.size() != eta2.rows() || eta2.rows() != eta2.cols()) {
    throw ConfigError("natural parameters have inconsistent shapes");
  }
  Matrix precision = -2.0 * eta2;
  precision = 0.5 * (precision + precision.transpose()).eval();
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success || !precision.allFinite()) {
    throw NumericError("-2 eta2 is not positive definite");
  }
  const Matrix l = llt.matrixL();
  if ((l.diagonal().array() <= 0.0).any()) throw NumericError("-2 eta2 is not positive definite");
  eta1_ = std::move(eta1);
  eta2_ = -0.5 * precision;
  sigma_ = llt.solve(Matrix::Identity(precision.rows(), precision.cols()));
  sigma_ = 0.5 * (sigma_ + sigma_.transpose()).eval();
  mu_ = llt.solve(eta1_);
  log_det_sigma_ = -2.0 * l.diagonal().array().log().sum();
}

void VariationalState::set_moments(const Vector& mu, const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericError("Sigma is not positive definite");
  const Matrix precision = llt.solve(Matrix::Identity(sigma.rows(), sigma.cols()));
  set_natural(precision * mu, -0.5 * precision);
}

Matrix kmeanspp_init(const Matrix& x, Eigen::Index m, Rng& rng, int lloyd_iters) {
  const Eigen::Index n = x.rows();
  if (m < 1 || m > n) throw ConfigError("k-means++ needs 1 <= m <= n");
  std::vector<Eigen::Index> chosen;
  chosen.reserve(static_cast<std::size_t>(m));
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  Vector mindist = Vector::Constant(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  chosen.push_back(first(rng));
  taken[static_cast<std::size_t>(chosen.back())] = true;
  while (static_cast<Eigen::Index>(chosen.size()) < m) {
    const auto last = chosen.back();
    for (Eigen::Index i = 0; i < n; ++i) {
      mindist[i] = std::min(mindist[i], (x.row(i) - x.row(last)).squaredNorm());
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!taken[static_cast<std::size_t>(i)]) total += mindist[i];
    }
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = unif(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)] || mindist[i] <= 0.0) continue;
        acc += mindist[i];
        pick = i;
        if (acc >= target) break;
      }
    }
    if (pick < 0) {
      // Remaining points all coincide with centers; choose uniformly among them.
      std::vector<Eigen::Index> rest;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!taken[static_cast<std::size_t>(i)]) rest.push_back(i);
      }
      std::uniform_int_distribution<std::size_t> u(0, rest.size() - 1);
      pick = rest[u(rng)];
    }
    chosen.push_back(pick);
    taken[static_cast<std::size_t>(pick)] = true;
  }

  Matrix centers(m, x.cols());
  for (Eigen::Index k = 0; k < m; ++k) centers.row(k) = x.row(chosen[static_cast<std::size_t>(k)]);

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < lloyd_iters; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      assign[static_cast<std::size_t>(i)] = best;
    }
    Matrix sums = Matrix::Zero(m, x.cols());
    Vector counts = Vector::Zero(m);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      counts[assign[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      if (counts[k] > 0.0) centers.row(k) = sums.row(k) / counts[k];  // empty clusters keep their center
    }
  }
  return centers;
}

VariationalState init_state(const Dataset& data, Eigen::Index m, const KernelParams& params,
                            Rng& rng) {
  data.validate();
  return init_state(data, kmeanspp_init(data.x, m, rng), params);
}

VariationalState init_state(const Dataset& data, Matrix z, const KernelParams& params) {
  data.validate();
  if (z.cols() != data.dim()) throw ConfigError("inducing inputs and data differ in dimension");
  VariationalState state(std::move(z), params, data.size());
  const GramBundle gram = build_gram(data.x, state.z, state.params);
  state.c = local_tilts(gram, state.mu(), state.sigma());
  return state;
}

std::string checkpoint_to_json(const VariationalState& s) {
  json j;
  j["schema"] = kCheckpointSchema;
  j["version"] = kCheckpointVersion;
  j["seed"] = s.seed;
  j["params"] = {{"log_lengthscale", s.params.log_lengthscale},
                 {"log_amplitude", s.params.log_amplitude},
                 {"log_jitter", s.params.log_jitter}};
  j["dim"] = s.z.cols();
  j["z"] = to_json_mat(s.z);
  j["eta1"] = to_json_vec(s.eta1());
  j["eta2"] = to_json_mat(s.eta2());
  j["c"] = to_json_vec(s.c);
  if (s.standardizer) {
    j["standardizer"] = {{"means", to_json_vec(s.standardizer->means)},
                         {"stds", to_json_vec(s.standardizer->stds)}};
  }
  return j.dump(1);
}

VariationalState checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != kCheckpointSchema) {
      throw DataError("checkpoint: unknown schema");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported version " + std::to_string(j.at("version").get<int>()));
    }
    VariationalState s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("params");
    s.params = KernelParams{p.at("log_lengthscale").get<double>(), p.at("log_amplitude").get<double>(),
                            p.at("log_jitter").get<double>()};
    s.z = mat_from_json(j.at("z"), j.value("dim", Eigen::Index{0}));
    s.c = vec_from_json(j.at("c"));
    s.set_natural(vec_from_json(j.at("eta1")), mat_from_json(j.at("eta2")));
    if (j.contains("standardizer")) {
      s.standardizer = Standardizer{vec_from_json(j["standardizer"].at("means")),
                                    vec_from_json(j["standardizer"].at("stds"))};
    }
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: missing or malformed field: ") + e.what());
  }
}

void save_checkpoint(const VariationalState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << checkpoint_to_json(state) << '\n';
}

VariationalState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace pgvi
