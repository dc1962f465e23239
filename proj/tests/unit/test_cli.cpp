#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "../../tools/commands.hpp"
#include "helpers.hpp"

using namespace pgvi;
namespace fs = std::filesystem;

namespace {

const std::string kBlobs = std::string(PGVI_DATA_DIR) + "/blobs.csv";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "pgvi");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pgvi_cli_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("train writes a checkpoint and a trace") {
  const fs::path dir = fresh_dir("train");
  const Result r = run({"train", "--data", kBlobs, "--format", "csv", "--m", "10", "--batch", "50",
                        "--max-iters", "40", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("final_elbo") != std::string::npos);
  CHECK(r.out.find("wall_seconds") != std::string::npos);
  const auto trace = lines(dir / "trace.csv");
  REQUIRE(trace.size() >= 3);
  CHECK(trace[0].rfind("# schema:", 0) == 0);
  CHECK(trace[1] == "iter,wall_seconds,elbo_estimate,rho,train_error");
  CHECK(fs::exists(dir / "model.json"));

  SUBCASE("predict and evaluate from the checkpoint") {
    const Result p = run({"predict", "--data", kBlobs, "--model", (dir / "model.json").string(), "--out-dir",
                          dir.string()});
    CHECK(p.code == 0);
    const auto preds = lines(dir / "predictions.csv");
    CHECK(preds.size() == 202);
    CHECK(preds[1] == "index,mu_star,var_star,p_pos,predicted_label");
    const Result e = run({"evaluate", "--data", kBlobs, "--model", (dir / "model.json").string(), "--out-dir",
                          dir.string()});
    CHECK(e.code == 0);
    const auto ev = lines(dir / "evaluation.csv");
    REQUIRE(ev.size() == 3);
    CHECK(ev[0].rfind("# schema:", 0) == 0);
    const double err = std::stod(ev[2].substr(ev[2].find(',') + 1));
    CHECK(err < 0.05);
  }
}

TEST_CASE("errors exit nonzero with a message") {
  const Result missing = run({"train", "--data", "/no/such/blobs.csv"});
  CHECK(missing.code != 0);
  CHECK(missing.err.find("/no/such/blobs.csv") != std::string::npos);
  CHECK(run({"train"}).code != 0);
  CHECK(run({"frobnicate"}).code != 0);
  CHECK(run({"train", "--data", kBlobs, "--lr", "sometimes"}).code != 0);
  const Result big = run({"gibbs-check", "--data", kBlobs, "--max-n", "50"});
  CHECK(big.code != 0);
  CHECK(big.err.find("--max-n") != std::string::npos);
}

TEST_CASE("same seed gives identical checkpoints") {
  const fs::path a = fresh_dir("seed_a");
  const fs::path b = fresh_dir("seed_b");
  for (const fs::path& d : {a, b}) {
    REQUIRE(run({"train", "--data", kBlobs, "--m", "8", "--batch", "40", "--max-iters", "60", "--seed", "11",
                 "--out-dir", d.string()})
                .code == 0);
  }
  CHECK(slurp(a / "model.json") == slurp(b / "model.json"));
}

TEST_CASE("config file, with flags taking precedence") {
  const fs::path dir = fresh_dir("config");
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream f(cfg);
    f << "# comment\n\ndata=" << kBlobs << "\nm=5\nmax-iters=20\nseed=3\n";
  }
  const auto opts = cli::read_config_file(cfg.string());
  CHECK(opts == std::vector<std::string>{"--data=" + kBlobs, "--m=5", "--max-iters=20", "--seed=3"});
  CHECK(cli::expand_config({"pgvi", "train", "--m", "9", "--config", cfg.string()}) ==
        std::vector<std::string>{"pgvi", "train", "--data=" + kBlobs, "--m=5", "--max-iters=20", "--seed=3", "--m",
                                 "9"});

  REQUIRE(run({"train", "--config", cfg.string(), "--out-dir", dir.string()}).code == 0);
  CHECK(load_checkpoint((dir / "model.json").string()).z.rows() == 5);
  REQUIRE(run({"train", "--config", cfg.string(), "--m", "7", "--out-dir", dir.string()}).code == 0);
  CHECK(load_checkpoint((dir / "model.json").string()).z.rows() == 7);
  CHECK_THROWS_AS(cli::read_config_file((dir / "absent.cfg").string()), Error);
}

TEST_CASE("learning-rate flag") {
  TrainConfig c;
  cli::parse_lr("fixed:0.25", c);
  CHECK(c.lr_mode == LrMode::kFixed);
  CHECK(c.fixed_lr == 0.25);
  cli::parse_lr("decay", c);
  CHECK(c.lr_mode == LrMode::kDecay);
  cli::parse_lr("adaptive", c);
  CHECK(c.lr_mode == LrMode::kAdaptive);
  CHECK_THROWS_AS(cli::parse_lr("fixed:2", c), ConfigError);
  CHECK_THROWS_AS(cli::parse_lr("fixed:", c), ConfigError);
}

TEST_CASE("cross-validation") {
  const Dataset data = load(kBlobs, FileFormat::kCsv);
  cli::Experiment exp;
  exp.train.num_inducing = 10;
  exp.train.batch_size = 50;
  exp.train.max_iters = 300;
  const cli::CvReport r = cli::run_cv(data, 2, exp);
  REQUIRE(r.folds.size() == 2);
  for (const auto& f : r.folds) {
    CHECK(f.error < 0.05);
    CHECK(f.train_seconds > 0.0);
  }
  const double e0 = r.folds[0].error;
  const double e1 = r.folds[1].error;
  CHECK(r.mean_error == doctest::Approx(0.5 * (e0 + e1)));
  CHECK(r.std_error == doctest::Approx(0.5 * std::abs(e0 - e1)));  // population std, k = 2

  const cli::CvReport again = cli::run_cv(data, 2, exp, /*parallel=*/true);
  for (int f = 0; f < 2; ++f) CHECK(again.folds[f].error == r.folds[f].error);

  const fs::path dir = fresh_dir("cv");
  const Result cv = run({"cv", "--data", kBlobs, "--folds", "2", "--m", "10", "--batch", "50", "--max-iters", "300",
                         "--out-dir", dir.string()});
  CHECK(cv.code == 0);
  const auto rows = lines(dir / "cv.csv");
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].rfind("# schema:", 0) == 0);
  CHECK(rows[1] == "fold,error,nll,train_seconds,iterations,converged");
  CHECK(rows[4].rfind("mean,", 0) == 0);
  CHECK(rows[5].rfind("std,", 0) == 0);
}

TEST_CASE("sweep-m with a single m reduces to cv") {
  const fs::path dir = fresh_dir("sweep");
  const std::vector<std::string> common{"--data", kBlobs, "--folds", "2", "--batch", "40", "--max-iters", "150",
                                        "--seed", "4", "--out-dir", dir.string()};
  std::vector<std::string> sweep{"sweep-m", "--m-list", "6"};
  sweep.insert(sweep.end(), common.begin(), common.end());
  std::vector<std::string> cv{"cv", "--m", "6"};
  cv.insert(cv.end(), common.begin(), common.end());
  REQUIRE(run(sweep).code == 0);
  REQUIRE(run(cv).code == 0);
  const auto s = lines(dir / "sweep_m.csv");
  const auto c = lines(dir / "cv.csv");
  REQUIRE(s.size() == 3);
  REQUIRE(c.size() == 6);
  CHECK(s[0].rfind("# schema:", 0) == 0);
  CHECK(s[1] == "m,mean_error,std_error,mean_nll,std_nll,mean_train_seconds");
  // m,mean_error,... versus mean,error,nll,...
  auto field = [](const std::string& line, int k) {
    std::stringstream ss(line);
    std::string f;
    for (int i = 0; i <= k; ++i) std::getline(ss, f, ',');
    return f;
  };
  CHECK(field(s[2], 0) == "6");
  CHECK(field(s[2], 1) == field(c[4], 1));
  CHECK(field(s[2], 3) == field(c[4], 2));
  CHECK(std::stod(field(s[2], 5)) > 0.0);
}

TEST_CASE("gibbs-check on a small dataset") {
  const fs::path dir = fresh_dir("gibbs");
  const Dataset data = load(kBlobs, FileFormat::kCsv);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < 60; ++i) rows.push_back(i);
  write(data.subset(rows), (fs::temp_directory_path() / "pgvi_cli_small.csv").string(), FileFormat::kCsv);
  const Result r = run({"gibbs-check", "--data", (fs::temp_directory_path() / "pgvi_cli_small.csv").string(),
                        "--sweeps", "1500", "--burn-in", "300", "--m", "10", "--batch", "30", "--max-iters", "100",
                        "--out-dir", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  const auto rows_out = lines(dir / "gibbs_comparison.csv");
  CHECK(rows_out.size() == 62);
}
