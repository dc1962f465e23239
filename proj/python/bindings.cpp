#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pgvi/data_io.hpp"
#include "pgvi/gibbs.hpp"
#include "pgvi/inference.hpp"
#include "pgvi/pg_math.hpp"
#include "pgvi/prediction.hpp"

namespace py = pybind11;
using namespace pgvi;

namespace {

Dataset make_dataset(const Matrix& x, const Vector& y) {
  Dataset d{x, y};
  d.validate();
  return d;
}

LrMode lr_mode(const std::string& name) {
  if (name == "adaptive") return LrMode::kAdaptive;
  if (name == "fixed") return LrMode::kFixed;
  if (name == "decay") return LrMode::kDecay;
  throw ConfigError("lr must be adaptive, fixed or decay");
}

}  // namespace

PYBIND11_MODULE(_pgvi, m) {
  m.doc() = "Polya-Gamma sparse GP classification with natural-gradient SVI";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<KernelParams>(m, "KernelParams")
      .def(py::init([](double log_lengthscale, double log_amplitude, double log_jitter) {
             KernelParams p{log_lengthscale, log_amplitude, log_jitter};
             p.validate();
             return p;
           }),
           py::arg("log_lengthscale") = 0.0, py::arg("log_amplitude") = 0.0, py::arg("log_jitter") = KernelParams{}.log_jitter)
      .def_readwrite("log_lengthscale", &KernelParams::log_lengthscale)
      .def_readwrite("log_amplitude", &KernelParams::log_amplitude)
      .def_readwrite("log_jitter", &KernelParams::log_jitter)
      .def("__repr__", [](const KernelParams& p) {
        return "KernelParams(log_lengthscale=" + std::to_string(p.log_lengthscale) +
               ", log_amplitude=" + std::to_string(p.log_amplitude) + ", log_jitter=" + std::to_string(p.log_jitter) +
               ")";
      });

  py::class_<VariationalState>(m, "Model")
      .def_property_readonly("mu", &VariationalState::mu)
      .def_property_readonly("sigma", &VariationalState::sigma)
      .def_property_readonly("eta1", &VariationalState::eta1)
      .def_property_readonly("eta2", &VariationalState::eta2)
      .def_readonly("z", &VariationalState::z)
      .def_readonly("c", &VariationalState::c)
      .def_readonly("params", &VariationalState::params)
      .def("predict",
           [](const VariationalState& s, const Matrix& x, int quad_order) {
             Predictor pred(s, quad_order);
             Vector mu;
             Vector var;
             pred.latent(x, mu, var);
             Vector p(mu.size());
             for (Eigen::Index i = 0; i < mu.size(); ++i) p[i] = class_prob(mu[i], var[i], quad_order);
             return py::make_tuple(mu, var, p);
           },
           py::arg("x"), py::arg("quad_order") = 20,
           "Returns (mu_star, var_star, p_pos) arrays for the rows of x.")
      .def("evaluate",
           [](const VariationalState& s, const Matrix& x, const Vector& y, int quad_order) {
             const Metrics met = evaluate(s, make_dataset(x, y), quad_order);
             return py::make_tuple(met.error, met.mean_nll);
           },
           py::arg("x"), py::arg("y"), py::arg("quad_order") = 20, "Returns (error, mean_nll).")
      .def("elbo", [](const VariationalState& s, const Matrix& x, const Vector& y) { return elbo(s, make_dataset(x, y)); })
      .def("save", &save_checkpoint, py::arg("path"))
      .def_static("load", &load_checkpoint, py::arg("path"));

  m.def(
      "fit",
      [](const Matrix& x, const Vector& y, Eigen::Index m_inducing, Eigen::Index batch_size, int max_iters,
         std::uint64_t seed, const std::string& lr, double fixed_lr, int hyper_every, const KernelParams& params) {
        const Dataset data = make_dataset(x, y);
        TrainConfig cfg;
        cfg.num_inducing = std::min(m_inducing, data.size());
        cfg.batch_size = std::min(batch_size, data.size());
        cfg.max_iters = max_iters;
        cfg.seed = seed;
        cfg.lr_mode = lr_mode(lr);
        cfg.fixed_lr = fixed_lr;
        cfg.hyper_every = hyper_every;
        cfg.initial_params = params;
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(data, cfg);
        }
        std::vector<double> trace;
        for (const auto& row : r.trace) trace.push_back(row.elbo_estimate);
        return py::make_tuple(std::move(r.state), trace, r.converged);
      },
      py::arg("x"), py::arg("y"), py::arg("m") = 100, py::arg("batch_size") = 100, py::arg("max_iters") = 5000,
      py::arg("seed") = 0, py::arg("lr") = "adaptive", py::arg("fixed_lr") = 1.0, py::arg("hyper_every") = 10,
      py::arg("params") = KernelParams{},
      "Trains on labels in {-1, +1}. Returns (model, elbo_trace, converged).");

  m.def("load_dataset",
        [](const std::string& path, const std::string& format) {
          const Dataset d = load(path, parse_format(format));
          return py::make_tuple(d.x, d.y);
        },
        py::arg("path"), py::arg("format") = "libsvm", "Returns (X, y) with y in {-1, +1}.");

  m.def("class_prob", &class_prob, py::arg("mu"), py::arg("var"), py::arg("quad_order") = 20);
  m.def("pg_mean", py::overload_cast<double, double>(&pg::pg_mean), py::arg("b"), py::arg("c"));
  m.def("theta", &pg::theta, py::arg("c"));
  m.def("pg_kl_term", &pg::pg_kl_term, py::arg("c"));
  m.def(
      "pg_sample",
      [](double c, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        Vector out(static_cast<Eigen::Index>(n));
        for (auto& v : out) v = pg::pg_sample(c, rng);
        return out;
      },
      py::arg("c"), py::arg("n"), py::arg("seed") = 0, "n draws from PG(1, c).");

  m.def(
      "gibbs",
      [](const Matrix& x, const Vector& y, const KernelParams& params, int sweeps, int burn_in, int thin,
         std::uint64_t seed) {
        const Dataset data = make_dataset(x, y);
        GibbsOptions o{sweeps, burn_in, thin, seed};
        GibbsChain chain;
        {
          py::gil_scoped_release release;
          chain = gibbs_run(data, params, o);
        }
        return py::make_tuple(chain.mean(), chain.variance(), chain.prob_positive());
      },
      py::arg("x"), py::arg("y"), py::arg("params"), py::arg("sweeps") = 5000, py::arg("burn_in") = 1000,
      py::arg("thin") = 2, py::arg("seed") = 0,
      "Full-GP Gibbs sampler. Returns per-point (mean, variance, p_pos) of the latent f.");
}
