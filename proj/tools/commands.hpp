#pragma once

// Command-line front end. The entry point is a library function so the
// commands can be exercised in-process by tests.

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "pgvi/data_io.hpp"
#include "pgvi/inference.hpp"

namespace pgvi::cli {

/// Runs one command line (argv[0] is the program name). Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads `key=value` lines (blank lines and lines starting with '#' are
/// skipped) and returns them as `--key=value` arguments.
std::vector<std::string> read_config_file(const std::string& path);

/// Removes `--config <path>` / `--config=<path>` from `args` and splices the
/// file's options in directly after the subcommand name, so that flags given
/// on the command line take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args);

/// Parses the --lr value: "adaptive", "decay" or "fixed:<rate>".
void parse_lr(const std::string& spec, TrainConfig& config);

/// Training settings shared by train, cv and sweep-m.
struct Experiment {
  TrainConfig train;
  bool standardize = true;
  /// Initial log lengthscale; NaN selects log(sqrt(d)).
  double log_lengthscale = std::numeric_limits<double>::quiet_NaN();
  int quad_order = 20;
};

struct FoldResult {
  int fold = 0;
  double error = 0.0;
  double nll = 0.0;
  double train_seconds = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct CvReport {
  std::vector<FoldResult> folds;
  double mean_error = 0.0;
  double std_error = 0.0;  ///< population std over folds (denominator k)
  double mean_nll = 0.0;
  double std_nll = 0.0;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
};

/// Standardizes (optionally) on the training part, fits and evaluates.
/// With held-out convergence, 10% of the training points are set aside.
/// The returned state carries the standardizer.
FitResult train_model(const Dataset& train, const Experiment& exp, double* seconds = nullptr);

FoldResult run_fold(const Dataset& data, const CvPlan& plan, int fold, const Experiment& exp);

/// k-fold cross-validation. Folds run on separate threads when `parallel`.
CvReport run_cv(const Dataset& data, int k, const Experiment& exp, bool parallel = false,
                bool canonical_folds = false);

/// Full-GP variational fit (Z = X, whole-data batch, rate 1, fixed
/// hyperparameters) used as the counterpart of the Gibbs oracle.
FitResult fit_full_gp(const Dataset& data, const KernelParams& params, double tol = 1e-6,
                      int max_iters = 500);

void write_cv_csv(const CvReport& report, const std::string& path);

}  // namespace pgvi::cli
