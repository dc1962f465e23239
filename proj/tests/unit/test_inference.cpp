#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <set>

#include "../../tools/commands.hpp"
#include "helpers.hpp"
#include "pgvi/inference.hpp"
#include "pgvi/pg_math.hpp"
#include "pgvi/prediction.hpp"

using namespace pgvi;

namespace {

std::span<const double> span_of(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double bound_at(const GramBundle& g, const Vector& y, const Vector& mu, const Matrix& sigma, const Vector& c) {
  Eigen::LLT<Matrix> llt(sigma);
  const double log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  return elbo_terms(g, span_of(y), mu, sigma, log_det, c);
}

Matrix theta_form(const GramBundle& g, const Vector& c, double scale = 1.0) {
  Vector th(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) th[i] = pg::theta(c[i]);
  return scale * g.kappa.transpose() * th.asDiagonal() * g.kappa;
}

}  // namespace

TEST_CASE("elbo on a single point") {
  Dataset d;
  d.x = Matrix::Zero(1, 1);
  d.y = Vector::Ones(1);
  const KernelParams p{0.0, 0.0, std::log(1e-14)};
  const VariationalState s = init_state(d, d.x, p);
  CHECK(s.c[0] == doctest::Approx(1.0).epsilon(1e-10));
  // Literal bound (the m/2 constant removed): -1/2 - log cosh(1/2), from mpmath.
  CHECK(elbo(s, d) - 0.5 == doctest::Approx(-0.620114506958277525).epsilon(1e-10));
  CHECK(elbo_lower_bound(s, d) == doctest::Approx(elbo(s, d) - std::numbers::ln2).epsilon(1e-15));
}

TEST_CASE("elbo components") {
  Rng rng(1);
  const Dataset data = test::random_dataset(8, 2, rng);
  VariationalState s = init_state(data, data.x.topRows(3), KernelParams{});
  const GramBundle g = build_gram(data.x, s.z, s.params);
  // q(u) = p(u): the Gaussian KL vanishes.
  CHECK(elbo_terms(g, span_of(data.y), s.mu(), s.sigma(), s.log_det_sigma(), s.c, 0.0) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  // c = 0: the PG-KL contributions vanish and theta = 1/4.
  s.set_moments(test::random_matrix(3, 1, rng), test::random_spd(3, rng));
  const Vector zero = Vector::Zero(8);
  const Vector km = g.kappa * s.mu();
  double expected = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i) {
    expected += data.y[i] * km[i] -
                0.25 * (g.k_tilde[i] + g.kappa.row(i) * s.sigma() * g.kappa.row(i).transpose() + km[i] * km[i]);
  }
  const Matrix& a = g.inducing->k_mm_inv;
  const double kl = 0.5 * ((a * s.sigma()).trace() + s.mu().dot(a * s.mu()) - 3.0 + g.inducing->log_det -
                           std::log(s.sigma().determinant()));
  CHECK(elbo_terms(g, span_of(data.y), s.mu(), s.sigma(), s.log_det_sigma(), zero) ==
        doctest::Approx(0.5 * expected - kl).epsilon(1e-10));
}

TEST_CASE("local update") {
  Rng rng(2);
  const Dataset data = test::random_dataset(5, 2, rng);
  const KernelParams p{0.0, 0.0, std::log(1e-12)};

  SUBCASE("full GP with Sigma = I") {
    VariationalState s = init_state(data, data.x, p);
    s.set_moments(Vector::Zero(5), Matrix::Identity(5, 5));
    local_update(s, build_gram(data.x, s.z, s.params), MiniBatch::full(5));
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(s.c[i] == doctest::Approx(1.0).epsilon(1e-5));
  }
  SUBCASE("prior marginal std") {
    const VariationalState s = init_state(data, data.x, p);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(s.c[i] == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("only batch entries change") {
    VariationalState s = init_state(data, data.x.topRows(3), p);
    s.c.setConstant(-7.0);
    MiniBatch b;
    b.indices = {1, 3};
    b.scale = 2.5;
    local_update(s, build_gram(data.x({1, 3}, Eigen::all), s.z, s.params), b);
    CHECK(s.c[0] == -7.0);
    CHECK(s.c[2] == -7.0);
    CHECK(s.c[4] == -7.0);
    CHECK(s.c[1] >= 0.0);
    CHECK(s.c[3] >= 0.0);
  }
}

TEST_CASE("local update maximizes the bound in each c_i") {
  Rng rng(3);
  const Dataset data = test::random_dataset(6, 2, rng);
  VariationalState s = test::random_state(data, 3, rng);
  const GramBundle g = build_gram(data.x, s.z, s.params);
  local_update(s, g, MiniBatch::full(6));
  const double base = bound_at(g, data.y, s.mu(), s.sigma(), s.c);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (double delta : {-1e-3, 1e-3}) {
      Vector c = s.c;
      c[i] = std::abs(c[i] + delta);
      CHECK(bound_at(g, data.y, s.mu(), s.sigma(), c) <= base);
    }
  }
}

TEST_CASE("Euclidean gradients match finite differences") {
  Rng rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    const Dataset data = test::random_dataset(8, 2, rng);
    const VariationalState s = test::random_state(data, 3, rng);
    const GramBundle g = build_gram(data.x, s.z, s.params);
    const Matrix sigma_inv = s.sigma().inverse();
    const EuclideanGradient eg = euclidean_gradient(g, span_of(data.y), s.mu(), sigma_inv, s.c);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < 3; ++i) {
      Vector up = s.mu();
      Vector dn = s.mu();
      up[i] += h;
      dn[i] -= h;
      const double fd = (bound_at(g, data.y, up, s.sigma(), s.c) - bound_at(g, data.y, dn, s.sigma(), s.c)) / (2 * h);
      CHECK(test::rel_err(eg.d_mu[i], fd) < 1e-5);
    }
    for (Eigen::Index i = 0; i < 3; ++i) {
      for (Eigen::Index j = i; j < 3; ++j) {
        Matrix e = Matrix::Zero(3, 3);
        e(i, j) = e(j, i) = 1.0;
        const double fd = (bound_at(g, data.y, s.mu(), s.sigma() + h * e, s.c) -
                           bound_at(g, data.y, s.mu(), s.sigma() - h * e, s.c)) / (2 * h);
        const double an = i == j ? eg.d_sigma(i, i) : 2.0 * eg.d_sigma(i, j);
        CHECK(test::rel_err(an, fd) < 1e-5);
      }
    }
    // Natural-gradient identity.
    const NaturalGradient ng = natural_gradient(s, g, span_of(data.y), span_of(s.c), 1.0);
    CHECK((ng.g1 - (eg.d_mu - 2.0 * eg.d_sigma * s.mu())).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((ng.g2 - eg.d_sigma).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("natural gradient fixed point and prior gradient") {
  Rng rng(5);
  const Dataset data = test::random_dataset(10, 2, rng);
  VariationalState s = init_state(data, data.x.topRows(4), KernelParams{});
  const GramBundle g = build_gram(data.x, s.z, s.params);
  const NaturalGradient at_prior = natural_gradient(s, g, span_of(data.y), span_of(s.c), 1.0);
  CHECK((at_prior.g1 - 0.5 * g.kappa.transpose() * data.y).norm() < 1e-12);

  const Vector eta1 = 0.5 * g.kappa.transpose() * data.y;
  const Matrix eta2 = -0.5 * (g.inducing->k_mm_inv + theta_form(g, s.c));
  s.set_natural(eta1, eta2);
  const NaturalGradient zero = natural_gradient(s, g, span_of(data.y), span_of(s.c), 1.0);
  CHECK(zero.g1.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(zero.g2.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mini-batch natural gradients are unbiased") {
  Rng rng(6);
  const Dataset data = test::random_dataset(6, 2, rng);
  const VariationalState s = test::random_state(data, 3, rng);
  const GramBundle full = build_gram(data.x, s.z, s.params);
  const NaturalGradient ref = natural_gradient(s, full, span_of(data.y), span_of(s.c), 1.0);
  Vector g1 = Vector::Zero(3);
  Matrix g2 = Matrix::Zero(3, 3);
  int count = 0;
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = i + 1; j < 6; ++j) {
      const std::vector<Eigen::Index> rows{i, j};
      const GramBundle g = build_gram(data.x(rows, Eigen::all), s.z, s.params);
      const Vector y{{data.y[i], data.y[j]}};
      const Vector c{{s.c[i], s.c[j]}};
      const NaturalGradient ng = natural_gradient(s, g, span_of(y), span_of(c), 3.0);
      g1 += ng.g1;
      g2 += ng.g2;
      ++count;
    }
  }
  CHECK(count == 15);
  CHECK((g1 / count - ref.g1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g2 / count - ref.g2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("global step") {
  Rng rng(7);
  const Dataset data = test::random_dataset(10, 2, rng);
  VariationalState s = test::random_state(data, 4, rng);
  const GramBundle g = build_gram(data.x, s.z, s.params);
  local_update(s, g, MiniBatch::full(10));

  SUBCASE("rho = 0 leaves the state unchanged") {
    const VariationalState before = s;
    global_step(s, natural_gradient(s, g, span_of(data.y), span_of(s.c), 1.0), 0.0);
    CHECK(s.eta1() == before.eta1());
    CHECK(s.eta2() == before.eta2());
  }
  SUBCASE("rho = 1 lands on the coordinate-ascent optimum") {
    global_step(s, natural_gradient(s, g, span_of(data.y), span_of(s.c), 1.0), 1.0);
    const Matrix target = -0.5 * (g.inducing->k_mm_inv + theta_form(g, s.c));
    CHECK((s.eta2() - target).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((s.eta1() - 0.5 * g.kappa.transpose() * data.y).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("alternating full-batch steps never decrease the bound") {
    double prev = bound_at(g, data.y, s.mu(), s.sigma(), s.c);
    for (int it = 0; it < 2; ++it) {
      global_step(s, natural_gradient(s, g, span_of(data.y), span_of(s.c), 1.0), 1.0);
      const double after_global = bound_at(g, data.y, s.mu(), s.sigma(), s.c);
      CHECK(after_global >= prev - 1e-9);
      local_update(s, g, MiniBatch::full(10));
      prev = bound_at(g, data.y, s.mu(), s.sigma(), s.c);
      CHECK(prev >= after_global - 1e-9);
    }
  }
  CHECK_THROWS_AS(global_step(s, natural_gradient(s, g, span_of(data.y), span_of(s.c), 1.0), 1.5), ConfigError);
}

TEST_CASE("learning-rate schedules") {
  SUBCASE("noiseless gradients give rate 1") {
    LearningRate lr(LrMode::kAdaptive);
    const Vector g = Vector::Constant(4, 0.3);
    for (int i = 0; i < 5; ++i) lr.burn_in(g);
    for (int i = 0; i < 20; ++i) CHECK(lr.next(g) == doctest::Approx(1.0));
  }
  SUBCASE("zero-mean noise drives the rate down") {
    LearningRate lr(LrMode::kAdaptive);
    Rng rng(8);
    for (int i = 0; i < 10; ++i) lr.burn_in(test::random_matrix(20, 1, rng));
    double rho = 1.0;
    for (int i = 0; i < 2000; ++i) rho = lr.next(test::random_matrix(20, 1, rng));
    CHECK(rho < 0.02);
    CHECK(rho >= LearningRate::kMinRate);
  }
  SUBCASE("burn-in sets tau to the count") {
    LearningRate lr(LrMode::kAdaptive);
    for (int i = 0; i < 10; ++i) lr.burn_in(Vector::Ones(2) * i);
    CHECK(lr.tau() == 10.0);
  }
  SUBCASE("fixed and decay") {
    LearningRate fixed(LrMode::kFixed, 0.3);
    CHECK(fixed.next(Vector::Ones(2)) == 0.3);
    CHECK(fixed.next(Vector::Zero(2)) == 0.3);
    LearningRate decay(LrMode::kDecay);
    CHECK(decay.next(Vector::Ones(2)) == 1.0);
    CHECK(decay.next(Vector::Ones(2)) == doctest::Approx(std::pow(2.0, -0.7)));
    CHECK_THROWS_AS(LearningRate(LrMode::kFixed, 0.0), ConfigError);
    CHECK_THROWS_AS(LearningRate(LrMode::kFixed, 1.5), ConfigError);
  }
}

TEST_CASE("hyperparameter gradient and Adam step") {
  Rng rng(9);
  const Dataset data = test::random_dataset(8, 2, rng);
  VariationalState s = test::random_state(data, 3, rng);
  const Eigen::Vector3d g = hyper_gradient(s, data);
  const double h = 1e-5;
  for (int j = 0; j < 3; ++j) {
    VariationalState up = s;
    VariationalState dn = s;
    Eigen::Vector3d v = s.params.as_vector();
    v[j] += h;
    up.params = KernelParams::from_vector(v);
    v[j] -= 2 * h;
    dn.params = KernelParams::from_vector(v);
    const double fd = (elbo(up, data) - elbo(dn, data)) / (2 * h);
    CHECK(test::rel_err(g[j], fd) < 1e-5);
  }

  AdamState frozen;
  frozen.lr = 0.0;
  const KernelParams before = s.params;
  hyper_step(s, data, frozen);
  CHECK(s.params == before);

  const double e0 = elbo(s, data);
  AdamState adam;
  adam.lr = 1e-4;
  hyper_step(s, data, adam);
  CHECK(!(s.params == before));
  CHECK(elbo(s, data) > e0);
}

TEST_CASE("hyper step reverts and halves the rate when the update is unusable") {
  Rng rng(12);
  const Dataset data = test::random_dataset(8, 2, rng);
  VariationalState s = test::random_state(data, 3, rng);
  const KernelParams before = s.params;
  AdamState adam;
  adam.lr = 1e4;  // every coordinate moves by ~1e4 in log space
  hyper_step(s, data, adam);
  CHECK(s.params == before);
  CHECK(adam.lr == 5e3);
  CHECK(adam.t == 0);
}

TEST_CASE("training") {
  Rng rng(10);
  SUBCASE("separable blobs") {
    const Dataset data = test::blobs(200, 2, 2.0, rng);
    TrainConfig cfg;
    cfg.num_inducing = 16;
    cfg.batch_size = 50;
    cfg.max_iters = 500;
    cfg.seed = 3;
    const FitResult r = fit(data, cfg);
    const GramBundle g = build_gram(data.x, r.state.z, r.state.params);
    const Vector f = g.kappa * r.state.mu();
    int wrong = 0;
    for (Eigen::Index i = 0; i < 200; ++i) wrong += (f[i] > 0) != (data.y[i] > 0);
    CHECK(wrong / 200.0 < 0.05);
    CHECK(!r.trace.empty());
  }
  SUBCASE("full GP, full batch, rate 1: monotone trace") {
    const Dataset data = test::random_dataset(30, 2, rng);
    TrainConfig cfg;
    cfg.num_inducing = 30;
    cfg.batch_size = 30;
    cfg.lr_mode = LrMode::kFixed;
    cfg.hyper_every = 0;
    cfg.max_iters = 60;
    cfg.conv_threshold = 1e-300;
    const FitResult r = fit(data, cfg, init_state(data, data.x, KernelParams{}));
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      CHECK(r.trace[i].elbo_estimate >= r.trace[i - 1].elbo_estimate - 1e-9);
    }
  }
  SUBCASE("bit-identical under a fixed seed") {
    const Dataset data = test::random_dataset(120, 3, rng);
    TrainConfig cfg;
    cfg.num_inducing = 10;
    cfg.batch_size = 25;
    cfg.max_iters = 80;
    cfg.seed = 42;
    cfg.trace_train_error = true;
    const FitResult a = fit(data, cfg);
    const FitResult b = fit(data, cfg);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
      CHECK(a.trace[i].elbo_estimate == b.trace[i].elbo_estimate);
      CHECK(a.trace[i].rho == b.trace[i].rho);
      CHECK(a.trace[i].train_error == b.trace[i].train_error);
    }
    CHECK(a.state.eta1() == b.state.eta1());
    CHECK(a.state.params == b.state.params);
  }
  SUBCASE("held-out convergence") {
    const Dataset data = test::blobs(200, 2, 1.5, rng);
    std::vector<Eigen::Index> tr;
    std::vector<Eigen::Index> ho;
    for (Eigen::Index i = 0; i < 200; ++i) (i % 10 == 0 ? ho : tr).push_back(i);
    TrainConfig cfg;
    cfg.num_inducing = 10;
    cfg.batch_size = 30;
    cfg.conv_mode = ConvMode::kHeldout;
    cfg.max_iters = 3000;
    const Dataset train = data.subset(tr);
    const Dataset held = data.subset(ho);
    const FitResult r = fit(train, cfg, &held);
    CHECK(r.converged);
    CHECK(r.iterations < 3000);
    CHECK_THROWS_AS(fit(train, cfg), ConfigError);
  }
  SUBCASE("config validation") {
    const Dataset data = test::random_dataset(20, 2, rng);
    TrainConfig cfg;
    cfg.num_inducing = 5;
    cfg.batch_size = 21;
    CHECK_THROWS_AS(fit(data, cfg), ConfigError);
    cfg.batch_size = 10;
    cfg.conv_threshold = 0.0;
    CHECK_THROWS_AS(fit(data, cfg), ConfigError);
  }
}

TEST_CASE("trace CSV") {
  std::vector<TraceRow> rows(2);
  rows[0] = {1, 0.5, -3.25, 1.0, std::nullopt};
  rows[1] = {2, 0.75, -3.0, 0.5, 0.125};
  const std::string path = "/tmp/pgvi_trace_test.csv";
  write_trace_csv(rows, path);
  std::ifstream in(path);
  std::string l1, l2, l3, l4;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  std::getline(in, l4);
  CHECK(l1.rfind("# schema:", 0) == 0);
  CHECK(l2 == "iter,wall_seconds,elbo_estimate,rho,train_error");
  CHECK(l3 == "1,0.5,-3.25,1,");
  CHECK(l4 == "2,0.75,-3,0.5,0.125");
}

TEST_CASE("Gibbs-MacKay identity") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector f = test::random_matrix(7, 1, rng, 2.0);
    Vector c(7);
    for (auto& v : c) v = u(rng);
    const Vector y = test::random_dataset(7, 1, rng).y;
    const BoundPair b = gibbs_mackay_bound(f, c, y);
    CHECK(std::abs(b.augmented - b.gibbs_mackay) < 1e-10);
    // Tight at c = |f|.
    const BoundPair t = gibbs_mackay_bound(f, f.cwiseAbs(), y);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < 7; ++i) ll += pg::log_sigmoid(y[i] * f[i]);
    CHECK(t.augmented == doctest::Approx(ll).epsilon(1e-12));
    CHECK(t.gibbs_mackay == doctest::Approx(ll).epsilon(1e-12));
    CHECK(b.augmented <= ll + 1e-12);
  }
  const BoundPair z = gibbs_mackay_bound(Vector::Zero(7), Vector::Zero(7), Vector::Ones(7));
  CHECK(z.augmented == doctest::Approx(-7.0 * std::numbers::ln2));
  CHECK(z.gibbs_mackay == doctest::Approx(-7.0 * std::numbers::ln2));
}

namespace {

/// log p(y) = log E_{f ~ N(0, K)} prod sigma(y_i f_i) by Monte Carlo, with
/// the standard error of the log estimate.
std::pair<double, double> log_marginal_mc(const Matrix& k, const Vector& y, int draws, Rng& rng) {
  const Matrix l = k.llt().matrixL();
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector z(y.size());
  double s = 0.0;
  double s2 = 0.0;
  for (int t = 0; t < draws; ++t) {
    for (auto& v : z) v = nd(rng);
    const Vector f = l * z;
    double lik = 1.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) lik *= pg::sigmoid(y[i] * f[i]);
    s += lik;
    s2 += lik * lik;
  }
  const double mean = s / draws;
  return {std::log(mean), std::sqrt((s2 / draws - mean * mean) / draws) / mean};
}

}  // namespace

TEST_CASE("bound gap dominates the expected omega KL (full GP)") {
  // log p(y) - L >= E_q(f)[KL(q(omega) || p(omega | f, y))]
  //   = sum_i log cosh(c_i/2) - E log cosh(f_i/2) - (c_i^2 - E f_i^2) theta_i / 2 >= 0.
  Rng rng(13);
  const GaussHermite& gh = gauss_hermite(60);
  for (Eigen::Index n : {2, 4, 6}) {
    const Dataset data = test::random_dataset(n, 2, rng);
    const KernelParams p{0.3, 0.4, std::log(1e-6)};
    VariationalState s = cli::fit_full_gp(data, p, 1e-10, 2000).state;
    const GramBundle g = build_gram(data.x, s.z, s.params);
    s.c = local_tilts(g, s.mu(), s.sigma());
    const Vector m = g.kappa * s.mu();
    const Vector v = (g.kappa * s.sigma() * g.kappa.transpose()).diagonal() + g.k_tilde;
    double expected_kl = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double e_lc = 0.0;
      for (Eigen::Index q = 0; q < gh.nodes.size(); ++q) {
        const double f = m[i] + std::sqrt(2.0 * v[i]) * gh.nodes[q];
        e_lc += gh.weights[q] * pg::log_cosh(0.5 * f);
      }
      e_lc /= std::sqrt(std::numbers::pi);
      const double th = pg::theta(s.c[i]);
      expected_kl += pg::log_cosh(0.5 * s.c[i]) - e_lc - 0.5 * th * (s.c[i] * s.c[i] - (m[i] * m[i] + v[i]));
    }
    const Matrix k = cross_covariance(data.x, data.x, p) + p.jitter() * Matrix::Identity(n, n);
    const auto [log_p, se] = log_marginal_mc(k, data.y, 1000000, rng);
    const double gap = log_p - elbo_lower_bound(s, data);
    CHECK(expected_kl >= -1e-12);
    CHECK(gap >= expected_kl - 3.0 * se);
  }
}
