#pragma once

// Layerwise baselines with a fixed width template: POP (two-pass greedy
// iterative search over operator sets) and PMLP (perceptrons only).

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gop/progression.hpp"

namespace gop {

struct LayerwiseConfig {
  std::vector<std::size_t> template_widths{200, 200, 200};
  /// Layer growth stops once the training MSE is at or below this value.
  double target_mse = 1e-3;
  /// Backpropagation epochs for every candidate network.
  std::size_t epochs_per_candidate = 20;
  TrainSpec train_spec;
  std::uint64_t seed = 0;
  /// Restricts the operator sets searched by POP (all 144 when empty).
  std::optional<std::vector<OperatorSet>> library;

  /// Throws ConfigError.
  void validate() const;
};

/// Each hidden layer is learned as a single-hidden-layer network whose hidden
/// and output neurons use one operator set each. Two-pass GIS trains
/// 4 * |library| candidates per layer; every one is logged in
/// `candidate_trainings`. `template_exhausted` is set when the target was
/// never reached.
std::pair<GopNetwork, ProgressionReport> run_pop_baseline(const TrainingData& data, const LayerwiseConfig& config);

/// Same layerwise procedure with every neuron pinned to the perceptron set and
/// no operator search.
std::pair<GopNetwork, ProgressionReport> run_pmlp_baseline(const TrainingData& data, const LayerwiseConfig& config);

}  // namespace gop
