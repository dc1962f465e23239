#include "pgvi/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>

namespace pgvi {

namespace {

struct RawRecord {
  std::vector<std::pair<Eigen::Index, double>> features;  // 0-indexed column, value
  double label = 0.0;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line_no, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<RawRecord> parse_libsvm(const std::string& text, const std::string& source,
                                    Eigen::Index& dim) {
  std::vector<RawRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const auto tokens = split_ws(trim(view));
    if (tokens.empty()) continue;
    RawRecord rec;
    if (!parse_double(tokens[0], rec.label)) fail(source, line_no, "invalid label '" + std::string(tokens[0]) + "'");
    Eigen::Index prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) {
        fail(source, line_no, "expected index:value, got '" + std::string(tokens[t]) + "'");
      }
      long long index = 0;
      const auto idx = tokens[t].substr(0, colon);
      const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), index);
      if (ec != std::errc() || ptr != idx.data() + idx.size() || index < 1) {
        fail(source, line_no, "invalid feature index '" + std::string(idx) + "'");
      }
      if (index <= prev) fail(source, line_no, "feature indices must be strictly increasing");
      prev = index;
      double value = 0.0;
      if (!parse_double(tokens[t].substr(colon + 1), value)) {
        fail(source, line_no, "invalid feature value in '" + std::string(tokens[t]) + "'");
      }
      rec.features.emplace_back(static_cast<Eigen::Index>(index - 1), value);
      max_index = std::max<Eigen::Index>(max_index, index);
    }
    records.push_back(std::move(rec));
  }
  if (dim == 0) {
    dim = max_index;
  } else if (max_index > dim) {
    throw DataError(source + ": feature index " + std::to_string(max_index) + " exceeds dimension " +
                    std::to_string(dim));
  }
  return records;
}

std::vector<RawRecord> parse_csv(const std::string& text, const CsvOptions& opts,
                                 const std::string& source, Eigen::Index& dim) {
  std::vector<RawRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split(view, opts.delimiter);
    if (first) {
      first = false;
      columns = fields.size();
      if (columns < 2) fail(source, line_no, "need at least one feature column and a label column");
      bool header = opts.header == CsvOptions::Header::kPresent;
      if (opts.header == CsvOptions::Header::kAuto) {
        double tmp = 0.0;
        header = std::any_of(fields.begin(), fields.end(), [&](auto f) { return !parse_double(f, tmp); });
      }
      if (header) continue;
    }
    if (fields.size() != columns) {
      fail(source, line_no, "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
    }
    const int ncol = static_cast<int>(columns);
    const int label_col = opts.label_column < 0 ? ncol + opts.label_column : opts.label_column;
    if (label_col < 0 || label_col >= ncol) fail(source, line_no, "label column out of range");
    RawRecord rec;
    Eigen::Index j = 0;
    for (int col = 0; col < ncol; ++col) {
      double value = 0.0;
      if (!parse_double(fields[static_cast<std::size_t>(col)], value)) {
        fail(source, line_no, "non-numeric field " + std::to_string(col + 1) + " '" +
                                  std::string(trim(fields[static_cast<std::size_t>(col)])) + "'");
      }
      if (col == label_col) {
        rec.label = value;
      } else {
        rec.features.emplace_back(j++, value);
      }
    }
    records.push_back(std::move(rec));
  }
  dim = columns > 0 ? static_cast<Eigen::Index>(columns) - 1 : 0;
  return records;
}

double map_label(double raw, const std::set<double>& values, const std::string& source) {
  const double lo = *values.begin();
  const double hi = *values.rbegin();
  const auto is = [&](double a, double b) { return lo == a && hi == b; };
  if (values.size() == 2) {
    if (is(-1.0, 1.0) || is(0.0, 1.0) || is(1.0, 2.0)) return raw == lo ? -1.0 : 1.0;
    throw DataError(source + ": unsupported label encoding (expected {-1,+1}, {0,1} or {1,2})");
  }
  if (raw == -1.0 || raw == 0.0) return -1.0;
  if (raw == 1.0 || raw == 2.0) return 1.0;
  throw DataError(source + ": unsupported label value");
}

}  // namespace

FileFormat parse_format(const std::string& name) {
  if (name == "libsvm") return FileFormat::kLibsvm;
  if (name == "csv") return FileFormat::kCsv;
  throw ConfigError("unknown format '" + name + "' (expected libsvm or csv)");
}

Dataset parse(const std::string& text, const LoadOptions& opts, const std::string& source) {
  Eigen::Index dim = opts.dim;
  const auto records = opts.format == FileFormat::kLibsvm ? parse_libsvm(text, source, dim)
                                                          : parse_csv(text, opts.csv, source, dim);
  if (records.empty()) throw DataError(source + ": no records");
  std::set<double> labels;
  for (const auto& r : records) labels.insert(r.label);
  if (labels.size() > 2) throw DataError(source + ": non-binary labels");

  Dataset data;
  data.x = Matrix::Zero(static_cast<Eigen::Index>(records.size()), dim);
  data.y.resize(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (const auto& [j, v] : records[i].features) data.x(row, j) = v;
    data.y[row] = map_label(records[i].label, labels, source);
  }
  return data;
}

Dataset load(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), opts, path);
}

Dataset load(const std::string& path, FileFormat format) {
  LoadOptions opts;
  opts.format = format;
  return load(path, opts);
}

void write(const Dataset& data, const std::string& path, FileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write data file: " + path);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (format == FileFormat::kLibsvm) {
      out << (data.y[i] > 0 ? "+1" : "-1");
      for (Eigen::Index j = 0; j < data.dim(); ++j) {
        if (data.x(i, j) != 0.0) out << ' ' << (j + 1) << ':' << format_double(data.x(i, j));
      }
    } else {
      for (Eigen::Index j = 0; j < data.dim(); ++j) out << format_double(data.x(i, j)) << ',';
      out << (data.y[i] > 0 ? "1" : "-1");
    }
    out << '\n';
  }
  if (!out) throw DataError("error writing data file: " + path);
}

Standardizer fit_standardizer(const Matrix& x) {
  if (x.rows() < 2) throw ConfigError("standardization needs at least two rows");
  Standardizer s;
  s.means = x.colwise().mean().transpose();
  s.stds = ((x.rowwise() - s.means.transpose()).array().square().colwise().mean().sqrt()).transpose();
  for (Eigen::Index j = 0; j < s.stds.size(); ++j) {
    if (s.stds[j] == 0.0) s.stds[j] = 1.0;
  }
  return s;
}

Standardized standardize(const Dataset& data) {
  Standardized out;
  out.transform = fit_standardizer(data.x);
  out.data.x = out.transform.apply(data.x);
  out.data.y = data.y;
  return out;
}

std::vector<Eigen::Index> CvPlan::test_indices(int fold) const {
  if (fold < 0 || fold >= k) throw ConfigError("fold id out of range");
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold && static_cast<Eigen::Index>(out.size()) < test_cap) {
      out.push_back(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

std::vector<Eigen::Index> CvPlan::train_indices(int fold) const {
  if (fold < 0 || fold >= k) throw ConfigError("fold id out of range");
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

CvPlan kfold(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2 || k > n) throw ConfigError("k-fold needs 2 <= k <= n");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  CvPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold_of.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    plan.fold_of[static_cast<std::size_t>(perm[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return plan;
}

CvPlan kfold_canonical(const Dataset& data, int k, std::uint64_t seed) {
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> sorted(static_cast<std::size_t>(n));
  std::iota(sorted.begin(), sorted.end(), Eigen::Index{0});
  std::stable_sort(sorted.begin(), sorted.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      if (data.x(a, j) != data.x(b, j)) return data.x(a, j) < data.x(b, j);
    }
    return data.y[a] < data.y[b];
  });
  const CvPlan by_rank = kfold(n, k, seed);
  CvPlan plan = by_rank;
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    plan.fold_of[static_cast<std::size_t>(sorted[r])] = by_rank.fold_of[r];
  }
  return plan;
}

MiniBatch MiniBatch::full(Eigen::Index n) {
  MiniBatch b;
  b.indices.resize(static_cast<std::size_t>(n));
  std::iota(b.indices.begin(), b.indices.end(), Eigen::Index{0});
  b.scale = 1.0;
  return b;
}

MiniBatchStream::MiniBatchStream(Eigen::Index n, Eigen::Index s, std::uint64_t seed)
    : n_(n), s_(s), rng_(seed) {
  if (s < 1 || s > n) throw ConfigError("mini-batch size must satisfy 1 <= s <= n");
  order_.resize(static_cast<std::size_t>(n));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  reshuffle();
}

void MiniBatchStream::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  pos_ = 0;
}

MiniBatch MiniBatchStream::next() {
  if (order_.empty()) throw ConfigError("mini-batch stream is not initialized");
  if (pos_ >= order_.size()) {
    reshuffle();
    ++epoch_;
  }
  const std::size_t take = std::min(static_cast<std::size_t>(s_), order_.size() - pos_);
  MiniBatch b;
  b.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                   order_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
  pos_ += take;
  b.scale = static_cast<double>(n_) / static_cast<double>(take);
  return b;
}

}  // namespace pgvi
