#pragma once

// Tabular classification datasets: CSV ingestion, stratified splits and
// train-only feature scaling.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gop/data.hpp"

namespace gop {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct Dataset {
  Matrix X;                         // N x D
  std::vector<std::size_t> y;       // labels in [0, num_classes)
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;    // in label order
  std::vector<std::string> feature_names;  // empty without a header
  SplitIndices split;

  std::size_t size() const noexcept { return y.size(); }
};

struct CsvOptions {
  /// Column name (needs a header) or 0-based index; the last column when unset.
  std::optional<std::string> label_column;
  bool header = true;
  char delimiter = ',';
};

/// Labels map to 0..C-1 in order of first appearance. Row and column numbers
/// in ParseError are 1-based and count data rows only. Throws ConfigError when
/// the file cannot be opened, ParseError, RaggedRows and UnknownLabelColumn.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {});

/// Header row of feature names plus a trailing "label" column, values written
/// with round-trip precision. Loading it back reproduces the features exactly;
/// label ids follow first appearance again.
std::string to_csv(const Dataset& ds);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  /// Fractions must be non-negative and sum to 1 within 1e-9. Throws ConfigError.
  void validate() const;
};

/// Deterministic in `seed`. Stratified splits keep class proportions; throws
/// ClassTooSmall when a class cannot be present in the training split (and in
/// every other split with a positive fraction when stratified).
SplitIndices split_dataset(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed,
                           bool stratified = true);

/// Per-feature z-scoring. Constant features get a unit scale.
struct FeatureScaling {
  Vector mean;
  Vector std;

  static FeatureScaling fit(const Matrix& X);
  static FeatureScaling identity(std::size_t dim);
  Matrix apply(const Matrix& X) const;
};

Matrix one_hot(const std::vector<std::size_t>& y, std::size_t num_classes);
LabeledSet subset(const Dataset& ds, const std::vector<std::size_t>& rows);

/// Scaling fitted on the training rows of `ds.split` only.
FeatureScaling fit_train_scaling(const Dataset& ds);

/// Builds the train/val/test sets from `ds.split` with one-hot targets; empty
/// val/test index sets become absent splits. `scaling` is applied to every split.
TrainingData to_training_data(const Dataset& ds, const std::optional<FeatureScaling>& scaling = std::nullopt);

}  // namespace gop
