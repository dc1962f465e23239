#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "pgvi/gibbs.hpp"
#include "pgvi/prediction.hpp"

namespace pgvi::cli {

namespace {

using Clock = std::chrono::steady_clock;

constexpr const char* kCsvSchemaPrefix = "# schema: ";

struct DataArgs {
  std::string path;
  std::string format = "auto";
  int label_column = -1;

  Dataset load_data() const {
    LoadOptions opts;
    if (format == "auto") {
      const auto ext = std::filesystem::path(path).extension().string();
      opts.format = (ext == ".csv" || ext == ".CSV") ? FileFormat::kCsv : FileFormat::kLibsvm;
    } else {
      opts.format = parse_format(format);
    }
    opts.csv.label_column = label_column;
    return load(path, opts);
  }
};

struct TrainArgs {
  Eigen::Index m = 100;
  Eigen::Index batch = 100;
  std::uint64_t seed = 0;
  int max_iters = 5000;
  std::string conv = "params";
  std::string lr = "adaptive";
  int hyper_every = 10;
  double adam_lr = 0.01;
  double conv_threshold = 1e-4;
  double lengthscale = 0.0;  // 0 selects sqrt(d)
  bool no_standardize = false;
  int quad_order = 20;

  Experiment experiment() const {
    Experiment exp;
    exp.train.num_inducing = m;
    exp.train.batch_size = batch;
    exp.train.seed = seed;
    exp.train.max_iters = max_iters;
    if (conv == "params") {
      exp.train.conv_mode = ConvMode::kParams;
    } else if (conv == "heldout") {
      exp.train.conv_mode = ConvMode::kHeldout;
    } else {
      throw ConfigError("--conv must be params or heldout");
    }
    parse_lr(lr, exp.train);
    exp.train.hyper_every = hyper_every;
    exp.train.adam_lr = adam_lr;
    exp.train.conv_threshold = conv_threshold;
    exp.standardize = !no_standardize;
    if (lengthscale < 0.0) throw ConfigError("--lengthscale must be positive");
    if (lengthscale > 0.0) exp.log_lengthscale = std::log(lengthscale);
    exp.quad_order = quad_order;
    return exp;
  }
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--data", d.path, "Dataset path")->required();
  cmd->add_option("--format", d.format, "libsvm, csv or auto (by extension)")
      ->check(CLI::IsMember({"auto", "libsvm", "csv"}));
  cmd->add_option("--label-column", d.label_column, "CSV label column (negative counts from the end)");
}

void add_train_options(CLI::App* cmd, TrainArgs& t) {
  cmd->add_option("--m", t.m, "Number of inducing points")->check(CLI::PositiveNumber);
  cmd->add_option("--batch", t.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", t.seed, "Random seed");
  cmd->add_option("--max-iters", t.max_iters, "Iteration cap")->check(CLI::NonNegativeNumber);
  cmd->add_option("--conv", t.conv, "Convergence criterion")->check(CLI::IsMember({"params", "heldout"}));
  cmd->add_option("--conv-threshold", t.conv_threshold, "Threshold for the parameter criterion");
  cmd->add_option("--lr", t.lr, "adaptive, decay or fixed:<rate>");
  cmd->add_option("--hyper-every", t.hyper_every, "Iterations between hyperparameter steps (0 = off)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--adam-lr", t.adam_lr, "Adam step size for hyperparameters");
  cmd->add_option("--lengthscale", t.lengthscale, "Initial lengthscale (default sqrt(d))");
  cmd->add_flag("--no-standardize", t.no_standardize, "Skip feature standardization");
  cmd->add_option("--quad-order", t.quad_order, "Gauss-Hermite order for class probabilities")
      ->check(CLI::PositiveNumber);
}

std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

double population_std(const std::vector<double>& v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

void print_cv_table(const CvReport& r, std::ostream& out) {
  out << std::fixed << std::setprecision(4);
  out << "fold   error     nll       seconds   iters  converged\n";
  for (const auto& f : r.folds) {
    out << std::setw(4) << f.fold << "   " << f.error << "    " << f.nll << "    " << std::setw(7)
        << f.train_seconds << "   " << std::setw(5) << f.iterations << "  " << (f.converged ? "yes" : "no")
        << '\n';
  }
  out << "error " << r.mean_error << " +- " << r.std_error << "\n";
  out << "nll   " << r.mean_nll << " +- " << r.std_nll << "\n";
  out << "secs  " << r.mean_seconds << " +- " << r.std_seconds << "\n";
  out << std::defaultfloat;
}

std::vector<Eigen::Index> parse_m_list(const std::string& text) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(static_cast<Eigen::Index>(v));
    } catch (const std::exception&) {
      throw ConfigError("--m-list expects comma-separated positive integers, got '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--m-list is empty");
  return out;
}

}  // namespace

void parse_lr(const std::string& spec, TrainConfig& config) {
  if (spec == "adaptive") {
    config.lr_mode = LrMode::kAdaptive;
  } else if (spec == "decay") {
    config.lr_mode = LrMode::kDecay;
  } else if (spec.rfind("fixed:", 0) == 0) {
    config.lr_mode = LrMode::kFixed;
    try {
      std::size_t used = 0;
      const std::string value = spec.substr(6);
      config.fixed_lr = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("--lr fixed:<rate> needs a number, got '" + spec + "'");
    }
    if (!(config.fixed_lr > 0.0 && config.fixed_lr <= 1.0)) throw ConfigError("--lr fixed rate must be in (0, 1]");
  } else {
    throw ConfigError("--lr must be adaptive, decay or fixed:<rate>, got '" + spec + "'");
  }
}

std::vector<std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::vector<std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (config_path.empty()) return args;
  const auto extra = read_config_file(config_path);
  // Insert after the subcommand so the command line wins under take-last.
  const std::size_t at = args.size() >= 2 ? 2 : args.size();
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
  return args;
}

FitResult train_model(const Dataset& train, const Experiment& exp, double* seconds) {
  const auto start = Clock::now();
  Dataset fit_data = train;
  std::optional<Standardizer> transform;
  if (exp.standardize) {
    auto s = standardize(train);
    fit_data = std::move(s.data);
    transform = std::move(s.transform);
  }
  TrainConfig config = exp.train;
  config.initial_params.log_lengthscale = std::isnan(exp.log_lengthscale)
                                              ? std::log(std::sqrt(static_cast<double>(fit_data.dim())))
                                              : exp.log_lengthscale;

  Dataset heldout;
  const Dataset* heldout_ptr = nullptr;
  if (config.conv_mode == ConvMode::kHeldout) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(fit_data.size()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_held = std::max<std::size_t>(1, perm.size() / 10);
    std::vector<Eigen::Index> held(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_held));
    std::vector<Eigen::Index> rest(perm.begin() + static_cast<std::ptrdiff_t>(n_held), perm.end());
    std::sort(held.begin(), held.end());
    std::sort(rest.begin(), rest.end());
    heldout = fit_data.subset(held);
    fit_data = fit_data.subset(rest);
    heldout_ptr = &heldout;
  }
  config.num_inducing = std::min(config.num_inducing, fit_data.size());
  config.batch_size = std::min(config.batch_size, fit_data.size());

  FitResult result = fit(fit_data, config, heldout_ptr);
  result.state.standardizer = transform;
  if (seconds) *seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

FoldResult run_fold(const Dataset& data, const CvPlan& plan, int fold, const Experiment& exp) {
  const Dataset train = data.subset(plan.train_indices(fold));
  const Dataset test = data.subset(plan.test_indices(fold));
  FoldResult r;
  r.fold = fold;
  Experiment e = exp;
  e.train.seed = exp.train.seed + static_cast<std::uint64_t>(fold);
  const FitResult fitted = train_model(train, e, &r.train_seconds);
  const Metrics m = evaluate(fitted.state, test, exp.quad_order);
  r.error = m.error;
  r.nll = m.mean_nll;
  r.iterations = fitted.iterations;
  r.converged = fitted.converged;
  return r;
}

CvReport run_cv(const Dataset& data, int k, const Experiment& exp, bool parallel, bool canonical_folds) {
  const CvPlan plan = canonical_folds ? kfold_canonical(data, k, exp.train.seed) : kfold(data.size(), k, exp.train.seed);
  CvReport report;
  report.folds.resize(static_cast<std::size_t>(k));
  if (parallel) {
    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(k)));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int f = static_cast<int>(w); f < k; f += static_cast<int>(workers)) {
          try {
            report.folds[static_cast<std::size_t>(f)] = run_fold(data, plan, f, exp);
          } catch (...) {
            errors[static_cast<std::size_t>(f)] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (int f = 0; f < k; ++f) report.folds[static_cast<std::size_t>(f)] = run_fold(data, plan, f, exp);
  }
  std::vector<double> err;
  std::vector<double> nll;
  std::vector<double> secs;
  for (const auto& f : report.folds) {
    err.push_back(f.error);
    nll.push_back(f.nll);
    secs.push_back(f.train_seconds);
  }
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  report.mean_error = mean(err);
  report.mean_nll = mean(nll);
  report.mean_seconds = mean(secs);
  report.std_error = population_std(err, report.mean_error);
  report.std_nll = population_std(nll, report.mean_nll);
  report.std_seconds = population_std(secs, report.mean_seconds);
  return report;
}

void write_cv_csv(const CvReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  out << kCsvSchemaPrefix << "pgvi.cv v1 (std is the population std over folds)\n";
  out << "fold,error,nll,train_seconds,iterations,converged\n";
  for (const auto& f : report.folds) {
    out << f.fold << ',' << format_double(f.error) << ',' << format_double(f.nll) << ','
        << format_double(f.train_seconds) << ',' << f.iterations << ',' << (f.converged ? 1 : 0) << '\n';
  }
  out << "mean," << format_double(report.mean_error) << ',' << format_double(report.mean_nll) << ','
      << format_double(report.mean_seconds) << ",,\n";
  out << "std," << format_double(report.std_error) << ',' << format_double(report.std_nll) << ','
      << format_double(report.std_seconds) << ",,\n";
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Polya-Gamma sparse GP classification with natural-gradient SVI", "pgvi"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all");
  app.footer("Any command also accepts --config <file> with key=value lines; flags override the file.");

  DataArgs data_args;
  TrainArgs train_args;
  std::string out_dir = ".";
  std::string model_path;
  int folds = 10;
  bool parallel = false;
  bool canonical = false;
  std::string m_list = "16,32,64,128";
  GibbsOptions gibbs_opts;
  std::size_t max_n = 1000;
  double min_corr = 0.99;
  double max_gap = 0.05;
  double vi_tol = 1e-6;
  int vi_iters = 500;
  bool learn_hyper = true;

  auto* train = app.add_subcommand("train", "Fit a model; writes model.json and trace.csv");
  add_data_options(train, data_args);
  add_train_options(train, train_args);
  train->add_option("--out-dir", out_dir, "Output directory");

  auto* predict = app.add_subcommand("predict", "Predict with a saved model; writes predictions.csv");
  add_data_options(predict, data_args);
  predict->add_option("--model", model_path, "Checkpoint from train")->required();
  predict->add_option("--quad-order", train_args.quad_order, "Gauss-Hermite order")->check(CLI::PositiveNumber);
  predict->add_option("--out-dir", out_dir, "Output directory");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Test error and NLL of a saved model");
  add_data_options(evaluate_cmd, data_args);
  evaluate_cmd->add_option("--model", model_path, "Checkpoint from train")->required();
  evaluate_cmd->add_option("--quad-order", train_args.quad_order, "Gauss-Hermite order")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--out-dir", out_dir, "Output directory");

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation; writes cv.csv");
  add_data_options(cv, data_args);
  add_train_options(cv, train_args);
  cv->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1 << 30));
  cv->add_flag("--parallel", parallel, "Run folds on separate threads");
  cv->add_flag("--canonical-folds", canonical, "Assign folds after sorting records (order-invariant)");
  cv->add_option("--out-dir", out_dir, "Output directory");

  auto* sweep = app.add_subcommand("sweep-m", "Cross-validation over several inducing-point counts");
  add_data_options(sweep, data_args);
  add_train_options(sweep, train_args);
  sweep->add_option("--m-list", m_list, "Comma-separated inducing-point counts");
  sweep->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1 << 30));
  sweep->add_flag("--parallel", parallel, "Run folds on separate threads");
  sweep->add_option("--out-dir", out_dir, "Output directory");

  auto* gibbs = app.add_subcommand("gibbs-check", "Compare a full-GP variational fit with Gibbs sampling");
  add_data_options(gibbs, data_args);
  add_train_options(gibbs, train_args);
  gibbs->add_option("--sweeps", gibbs_opts.sweeps, "Gibbs sweeps including burn-in")->check(CLI::PositiveNumber);
  gibbs->add_option("--burn-in", gibbs_opts.burn_in, "Discarded sweeps")->check(CLI::NonNegativeNumber);
  gibbs->add_option("--thin", gibbs_opts.thin, "Keep every thin-th sweep")->check(CLI::PositiveNumber);
  gibbs->add_option("--max-n", max_n, "Largest dataset the oracle accepts");
  gibbs->add_option("--min-corr", min_corr, "Required posterior-mean correlation");
  gibbs->add_option("--max-gap", max_gap, "Allowed mean absolute probability gap");
  gibbs->add_option("--vi-tol", vi_tol, "Convergence threshold for the full-GP variational fit");
  gibbs->add_option("--vi-iters", vi_iters, "Iteration cap for the full-GP variational fit");
  gibbs->add_option("--learn-hyper", learn_hyper, "Learn hyperparameters with a sparse fit first");
  gibbs->add_option("--out-dir", out_dir, "Output directory");

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (train->parsed()) {
      const Dataset data = data_args.load_data();
      double seconds = 0.0;
      const FitResult r = train_model(data, train_args.experiment(), &seconds);
      const auto dir = prepare_out_dir(out_dir);
      save_checkpoint(r.state, (dir / "model.json").string());
      write_trace_csv(r.trace, (dir / "trace.csv").string());
      VariationalState final_state = r.state;
      const Dataset fit_data{r.state.standardizer ? r.state.standardizer->apply(data.x) : data.x, data.y};
      final_state.c = local_tilts(build_gram(fit_data.x, final_state.z, final_state.params), final_state.mu(),
                                  final_state.sigma());
      out << "iterations " << r.iterations << (r.converged ? " (converged)" : " (iteration cap)") << '\n';
      out << "final_elbo " << format_double(elbo(final_state, fit_data)) << '\n';
      out << "wall_seconds " << format_double(seconds) << '\n';
      out << "wrote " << (dir / "model.json").string() << " and " << (dir / "trace.csv").string() << '\n';
    } else if (predict->parsed()) {
      const VariationalState state = load_checkpoint(model_path);
      const Dataset data = data_args.load_data();
      const auto preds = Predictor(state, train_args.quad_order).predict(data.x);
      const auto dir = prepare_out_dir(out_dir);
      write_predictions_csv(preds, (dir / "predictions.csv").string());
      out << "wrote " << preds.size() << " predictions to " << (dir / "predictions.csv").string() << '\n';
    } else if (evaluate_cmd->parsed()) {
      const VariationalState state = load_checkpoint(model_path);
      const Dataset data = data_args.load_data();
      const Metrics m = evaluate(state, data, train_args.quad_order);
      const auto dir = prepare_out_dir(out_dir);
      std::ofstream csv(dir / "evaluation.csv");
      csv << kCsvSchemaPrefix << "pgvi.evaluation v1\n" << "n,error,nll\n"
          << data.size() << ',' << format_double(m.error) << ',' << format_double(m.mean_nll) << '\n';
      out << "error " << format_double(m.error) << "\nnll " << format_double(m.mean_nll) << '\n';
    } else if (cv->parsed()) {
      const Dataset data = data_args.load_data();
      const CvReport report = run_cv(data, folds, train_args.experiment(), parallel, canonical);
      const auto dir = prepare_out_dir(out_dir);
      write_cv_csv(report, (dir / "cv.csv").string());
      print_cv_table(report, out);
    } else if (sweep->parsed()) {
      const Dataset data = data_args.load_data();
      const auto ms = parse_m_list(m_list);
      const auto dir = prepare_out_dir(out_dir);
      std::ofstream csv(dir / "sweep_m.csv");
      csv << kCsvSchemaPrefix << "pgvi.sweep_m v1 (std is the population std over folds)\n";
      csv << "m,mean_error,std_error,mean_nll,std_nll,mean_train_seconds\n";
      for (const auto m : ms) {
        Experiment exp = train_args.experiment();
        exp.train.num_inducing = m;
        const CvReport r = run_cv(data, folds, exp, parallel);
        csv << m << ',' << format_double(r.mean_error) << ',' << format_double(r.std_error) << ','
            << format_double(r.mean_nll) << ',' << format_double(r.std_nll) << ','
            << format_double(r.mean_seconds) << '\n';
        out << "m " << m << "  error " << r.mean_error << "  nll " << r.mean_nll << "  seconds "
            << r.mean_seconds << '\n';
      }
    } else if (gibbs->parsed()) {
      const Dataset raw = data_args.load_data();
      if (static_cast<std::size_t>(raw.size()) > max_n) {
        throw ConfigError("dataset has " + std::to_string(raw.size()) + " points; the Gibbs oracle is capped at " +
                          std::to_string(max_n) + " (--max-n)");
      }
      Experiment exp = train_args.experiment();
      const Dataset data = exp.standardize ? standardize(raw).data : raw;
      KernelParams params;
      params.log_lengthscale = std::isnan(exp.log_lengthscale) ? std::log(std::sqrt(static_cast<double>(data.dim())))
                                                               : exp.log_lengthscale;
      if (learn_hyper) {
        exp.standardize = false;
        exp.log_lengthscale = params.log_lengthscale;
        params = train_model(data, exp).state.params;
      }
      gibbs_opts.seed = train_args.seed;
      gibbs_opts.validate();
      const FitResult vi = fit_full_gp(data, params, vi_tol, vi_iters);
      const GibbsChain chain = gibbs_run(data, params, gibbs_opts);
      const AgreementReport report = compare_to_vi(chain, data, vi.state, train_args.quad_order);
      const auto dir = prepare_out_dir(out_dir);
      write_comparison_csv(report, (dir / "gibbs_comparison.csv").string());
      out << "params log_lengthscale " << params.log_lengthscale << " log_amplitude " << params.log_amplitude
          << " log_jitter " << params.log_jitter << '\n';
      out << "mean  pearson " << report.mean.pearson << "  mean|diff| " << report.mean.mean_abs_diff << '\n';
      out << "var   pearson " << report.var.pearson << "  mean|diff| " << report.var.mean_abs_diff << '\n';
      out << "ppos  pearson " << report.ppos.pearson << "  mean|diff| " << report.ppos.mean_abs_diff << '\n';
      const bool ok = report.passes(min_corr, max_gap);
      out << (ok ? "PASS" : "FAIL") << '\n';
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

FitResult fit_full_gp(const Dataset& data, const KernelParams& params, double tol, int max_iters) {
  TrainConfig config;
  config.num_inducing = data.size();
  config.batch_size = data.size();
  config.lr_mode = LrMode::kFixed;
  config.fixed_lr = 1.0;
  config.hyper_every = 0;
  config.conv_threshold = tol;
  config.conv_window = 1;
  config.max_iters = max_iters;
  config.initial_params = params;
  return fit(data, config, init_state(data, data.x, params));
}

}  // namespace pgvi::cli
