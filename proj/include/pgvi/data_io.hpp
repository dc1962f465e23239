#pragma once

// Dataset loading (LibSVM and CSV), standardization, k-fold plans and
// mini-batch sampling.

#include <string>
#include <vector>

#include "pgvi/common.hpp"
#include "pgvi/model.hpp"

namespace pgvi {

enum class FileFormat { kLibsvm, kCsv };

FileFormat parse_format(const std::string& name);

struct CsvOptions {
  /// Column holding the label; negative counts from the end (-1 = last).
  int label_column = -1;
  /// "auto" detects a header when the first row has a non-numeric field.
  enum class Header { kAuto, kPresent, kAbsent } header = Header::kAuto;
  char delimiter = ',';
};

struct LoadOptions {
  FileFormat format = FileFormat::kLibsvm;
  CsvOptions csv;
  /// LibSVM only: force the feature dimension (0 = infer from max index).
  Eigen::Index dim = 0;
};

/// Reads a dataset. Labels are mapped to {-1,+1}; accepted encodings are
/// {-1,+1}, {0,1} and {1,2} (the smaller value becomes -1). Throws DataError
/// naming the file and line for malformed input, and "non-binary labels"
/// when more than two label values occur.
Dataset load(const std::string& path, const LoadOptions& opts);
Dataset load(const std::string& path, FileFormat format);

/// Parses from an in-memory buffer; `source` is used in error messages.
Dataset parse(const std::string& text, const LoadOptions& opts, const std::string& source = "<memory>");

/// Writes LibSVM text (sparse, 1-indexed, zero features omitted) with
/// shortest round-trip doubles, or headerless CSV with the label last.
void write(const Dataset& data, const std::string& path, FileFormat format);

/// Learns per-column mean and population std (std 0 is recorded as 1).
/// Requires n >= 2.
Standardizer fit_standardizer(const Matrix& x);

struct Standardized {
  Dataset data;
  Standardizer transform;
};

Standardized standardize(const Dataset& data);

/// k-fold assignment: fold sizes differ by at most one, deterministic by seed.
struct CvPlan {
  int k = 0;
  std::vector<int> fold_of;  ///< fold id per point
  std::uint64_t seed = 0;
  /// Test folds larger than this are truncated to their first `test_cap` points.
  Eigen::Index test_cap = 100000;

  std::vector<Eigen::Index> test_indices(int fold) const;
  std::vector<Eigen::Index> train_indices(int fold) const;
};

/// Throws ConfigError unless 2 <= k <= n.
CvPlan kfold(Eigen::Index n, int k, std::uint64_t seed);

/// Order-invariant variant: points are first sorted by (features, label) so
/// the assignment depends only on the multiset of records and the seed.
CvPlan kfold_canonical(const Dataset& data, int k, std::uint64_t seed);

/// A set S of distinct row indices with the n / |S| rescaling factor.
struct MiniBatch {
  std::vector<Eigen::Index> indices;
  double scale = 1.0;

  static MiniBatch full(Eigen::Index n);
};

/// Mini-batches sampled without replacement within an epoch, reshuffled
/// every epoch. When s does not divide n the last batch of an epoch is
/// smaller; its scale is n / |S| for its own size.
class MiniBatchStream {
 public:
  MiniBatchStream() = default;
  /// Throws ConfigError unless 1 <= s <= n.
  MiniBatchStream(Eigen::Index n, Eigen::Index s, std::uint64_t seed);

  MiniBatch next();

  Eigen::Index batch_size() const { return s_; }
  int epoch() const { return epoch_; }

 private:
  void reshuffle();

  Eigen::Index n_ = 0;
  Eigen::Index s_ = 0;
  Rng rng_;
  std::vector<Eigen::Index> order_;
  std::size_t pos_ = 0;
  int epoch_ = 0;
};

}  // namespace pgvi
