#pragma once

#include <cstddef>
#include <optional>

#include "gop/network.hpp"

namespace gop {

/// Inputs with one-hot (or real-valued) targets, one sample per row.
struct LabeledSet {
  Matrix X;
  Matrix Y;

  std::size_t size() const noexcept { return static_cast<std::size_t>(X.rows()); }
};

struct TrainingData {
  LabeledSet train;
  std::optional<LabeledSet> val;
  std::optional<LabeledSet> test;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(train.X.cols()); }
  std::size_t num_outputs() const noexcept { return static_cast<std::size_t>(train.Y.cols()); }
  /// Validation split when present, else the training split.
  const LabeledSet& selection_split() const noexcept { return val ? *val : train; }
};

}  // namespace gop
