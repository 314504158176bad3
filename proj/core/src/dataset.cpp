#include "gop/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gop/errors.hpp"
#include "gop/random.hpp"

namespace gop {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool parse_index(const std::string& s, std::size_t& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool header_pending = options.header;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_line(line, options.delimiter);
    if (header_pending) {
      header = std::move(cells);
      header_pending = false;
      continue;
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw EmptyInput("CSV has no data rows");

  const std::size_t cols = options.header ? header.size() : rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols)
      throw RaggedRows("row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                       " columns, expected " + std::to_string(cols));
  }
  if (cols < 2) throw RaggedRows("CSV needs at least one feature column and one label column");

  std::size_t label = cols - 1;
  if (options.label_column) {
    const std::string& want = *options.label_column;
    const auto it = std::find(header.begin(), header.end(), want);
    std::size_t idx = 0;
    if (it != header.end()) {
      label = static_cast<std::size_t>(it - header.begin());
    } else if (parse_index(want, idx) && idx < cols) {
      label = idx;
    } else {
      throw UnknownLabelColumn("label column '" + want + "' not found");
    }
  }

  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
  if (options.header) {
    for (std::size_t c = 0; c < cols; ++c)
      if (c != label) ds.feature_names.push_back(header[c]);
  }
  std::map<std::string, std::size_t> label_ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Eigen::Index f = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string& cell = rows[r][c];
      if (c == label) {
        auto [it, inserted] = label_ids.emplace(cell, ds.class_names.size());
        if (inserted) ds.class_names.push_back(cell);
        ds.y.push_back(it->second);
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
        throw ParseError(r + 1, c + 1, "'" + cell + "' is not a number");
      if (!std::isfinite(v)) throw ParseError(r + 1, c + 1, "non-finite value '" + cell + "'");
      ds.X(static_cast<Eigen::Index>(r), f++) = v;
    }
  }
  ds.num_classes = ds.class_names.size();
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open dataset file '" + path.string() + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_csv(buf.str(), options);
}

std::string to_csv(const Dataset& ds) {
  std::ostringstream out;
  const auto dim = ds.X.cols();
  for (Eigen::Index j = 0; j < dim; ++j) {
    const auto u = static_cast<std::size_t>(j);
    out << (u < ds.feature_names.size() ? ds.feature_names[u] : "x" + std::to_string(j)) << ',';
  }
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.X(static_cast<Eigen::Index>(i), j));
      out << buf << ',';
    }
    out << (ds.y[i] < ds.class_names.size() ? ds.class_names[ds.y[i]] : std::to_string(ds.y[i])) << '\n';
  }
  return out.str();
}

void SplitFractions::validate() const {
  if (!(train >= 0.0 && val >= 0.0 && test >= 0.0)) throw ConfigError("split fractions must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1 (got " + std::to_string(train + val + test) + ")");
  if (train <= 0.0) throw ConfigError("training fraction must be positive");
}

SplitIndices split_dataset(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed, bool stratified) {
  fractions.validate();
  if (ds.size() == 0) throw EmptyInput("cannot split an empty dataset");

  auto counts_for = [&](std::size_t n) {
    std::size_t tr = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.train));
    std::size_t va = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.val));
    tr = std::min(tr, n);
    va = std::min(va, n - tr);
    if (fractions.test == 0.0) va = n - tr;
    return std::pair{tr, va};
  };

  SplitIndices out;
  auto distribute = [&](std::vector<std::size_t>& idx, std::size_t tr, std::size_t va) {
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(tr));
    out.val.insert(out.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(tr),
                   idx.begin() + static_cast<std::ptrdiff_t>(tr + va));
    out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(tr + va), idx.end());
  };

  if (stratified) {
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(ds.y[i]).push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto& idx = by_class[c];
      if (idx.empty()) continue;
      Rng rng(derive_seed({seed, c}));
      rng.shuffle(std::span<std::size_t>(idx));
      const auto [tr, va] = counts_for(idx.size());
      const std::size_t te = idx.size() - tr - va;
      if (tr == 0 || (fractions.val > 0.0 && va == 0) || (fractions.test > 0.0 && te == 0))
        throw ClassTooSmall("class '" + (c < ds.class_names.size() ? ds.class_names[c] : std::to_string(c)) +
                            "' has " + std::to_string(idx.size()) + " samples, too few to stratify");
      distribute(idx, tr, va);
    }
  } else {
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));
    const auto [tr, va] = counts_for(idx.size());
    distribute(idx, tr, va);
    std::vector<char> seen(ds.num_classes, 0);
    for (auto i : out.train) seen[ds.y[i]] = 1;
    for (std::size_t c = 0; c < seen.size(); ++c)
      if (!seen[c]) throw ClassTooSmall("class " + std::to_string(c) + " is missing from the training split");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

FeatureScaling FeatureScaling::fit(const Matrix& X) {
  if (X.rows() == 0) throw EmptyInput("cannot fit feature scaling on zero rows");
  FeatureScaling s;
  s.mean = X.colwise().mean().transpose();
  s.std.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt((X.col(j).array() - s.mean[j]).square().mean());
    s.std[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

FeatureScaling FeatureScaling::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Vector::Zero(d), Vector::Ones(d)};
}

Matrix FeatureScaling::apply(const Matrix& X) const {
  if (X.cols() != mean.size())
    throw DimensionMismatch("feature scaling expects " + std::to_string(mean.size()) + " features, got " +
                            std::to_string(X.cols()));
  return (X.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Matrix one_hot(const std::vector<std::size_t>& y, std::size_t num_classes) {
  Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= num_classes) throw DimensionMismatch("label outside [0, num_classes)");
    Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[i])) = 1.0;
  }
  return Y;
}

LabeledSet subset(const Dataset& ds, const std::vector<std::size_t>& rows) {
  LabeledSet s;
  s.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
  std::vector<std::size_t> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(static_cast<Eigen::Index>(rows.at(i)));
    labels[i] = ds.y.at(rows[i]);
  }
  s.Y = one_hot(labels, ds.num_classes);
  return s;
}

FeatureScaling fit_train_scaling(const Dataset& ds) { return FeatureScaling::fit(subset(ds, ds.split.train).X); }

TrainingData to_training_data(const Dataset& ds, const std::optional<FeatureScaling>& scaling) {
  if (ds.split.train.empty()) throw EmptyInput("dataset has no training split");
  auto make = [&](const std::vector<std::size_t>& rows) {
    LabeledSet s = subset(ds, rows);
    if (scaling) s.X = scaling->apply(s.X);
    return s;
  };
  TrainingData data;
  data.train = make(ds.split.train);
  if (!ds.split.val.empty()) data.val = make(ds.split.val);
  if (!ds.split.test.empty()) data.test = make(ds.split.test);
  return data;
}

}  // namespace gop
