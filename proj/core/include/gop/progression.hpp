#pragma once

// Progressive construction of heterogeneous multilayer GOP networks.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gop/data.hpp"
#include "gop/network.hpp"
#include "gop/ridge.hpp"
#include "gop/trainer.hpp"

namespace gop {

enum class Variant { HeMLGOP, HoMLGOP, HeMLRN, HoMLRN };
enum class RateMetric { Loss, Accuracy };

/// Homogeneous variants reuse the first operator set of a layer for every block.
bool is_homogeneous(Variant v) noexcept;
/// GOP variants finetune each new block by backpropagation right after search.
bool finetunes_each_step(Variant v) noexcept;

std::string to_token(Variant v);
Variant parse_variant(const std::string& token);
std::string to_token(RateMetric m);
RateMetric parse_rate_metric(const std::string& token);

struct ProgressionConfig {
  std::size_t n_min = 40;
  std::size_t n_i = 20;
  std::size_t max_layer_width = 200;
  std::size_t max_layers = 8;
  double eps_n = 1e-4;
  double eps_l = 1e-4;
  RateMetric rate_metric = RateMetric::Loss;
  Variant variant = Variant::HeMLGOP;
  std::vector<double> c_grid{0.1, 1.0, 10.0};
  CandidateMetric search_metric = CandidateMetric::MSE;
  TrainSpec train_spec;
  std::uint64_t seed = 0;
  /// Restricts the operator sets searched (all 144 when empty).
  std::optional<std::vector<OperatorSet>> library;

  /// Throws ConfigError.
  void validate() const;
  std::vector<OperatorSet> effective_library() const;
};

/// Loss metric: (before - after) / before. Accuracy metric: (after - before) / before.
/// Throws DegenerateBaseline when before == 0.
double improvement_rate(double before, double after, RateMetric metric);

/// Fixed inputs of the layer being grown, together with the already committed
/// (normalized) outputs of that layer. `existing_*` may have zero columns.
struct SearchContext {
  const Matrix& features_train;
  const Matrix& targets_train;
  const Matrix& existing_train;
  /// Selection split; when absent candidates are scored on the training split.
  const Matrix* features_val = nullptr;
  const Matrix* targets_val = nullptr;
  const Matrix* existing_val = nullptr;
  std::size_t layer_index = 0;
  std::size_t step = 0;
};

struct SearchResult {
  NeuronBlock block;    // random weights of the winning candidate
  NormState norm;       // standardization fitted on the training split
  CandidateEvaluation evaluation;
  /// One entry per library index (kNumOperatorSets). Empty for sets that were
  /// not evaluated, -infinity for candidates whose solve failed.
  std::vector<std::optional<double>> candidate_scores;
};

/// Randomized-network search: every candidate gets Uniform(-1, 1) weights and
/// biases from a seed derived from (seed, layer, step, nodal and pool
/// operators), its standardized output is appended to the existing features
/// and the output map is solved in closed form. Highest score wins; ties go to
/// the lowest operator index. Throws AllCandidatesFailed.
SearchResult search_operator_set(const SearchContext& ctx, std::size_t width,
                                 const std::vector<OperatorSet>& library, const ProgressionConfig& config);

struct StepRecord {
  std::size_t layer_index = 0;
  std::size_t step = 0;
  std::size_t block_width = 0;
  std::vector<std::optional<double>> candidate_scores;
  OperatorSet chosen_op_set;
  double best_c = 0.0;
  double loss_before = 0.0;  // rate metric value before the step
  double loss_after = 0.0;
  double r_value = 0.0;
  bool accepted = false;
  double wall_time = 0.0;  // seconds
};

struct LayerRecord {
  std::size_t layer_index = 0;
  std::size_t width = 0;
  std::size_t blocks = 0;
  double metric_before = 0.0;
  double metric_after = 0.0;
  double r_value = 0.0;
  bool accepted = false;
};

struct SplitMetrics {
  double loss = 0.0;  // MSE
  double accuracy = 0.0;
};

struct FinalMetrics {
  SplitMetrics train;
  std::optional<SplitMetrics> val;
  std::optional<SplitMetrics> test;
};

/// One backpropagation run of the layerwise baselines.
struct CandidateTraining {
  std::size_t layer_index = 0;
  std::size_t pass = 0;     // 1 or 2
  std::string phase;        // "output" or "hidden"
  OperatorSet hidden_op_set;
  OperatorSet output_op_set;
  double loss = 0.0;        // MSE on the selection split (+inf when training diverged)
};

struct ProgressionReport {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<LayerRecord> layers;
  std::vector<CandidateTraining> candidate_trainings;
  bool template_exhausted = false;
  FinalMetrics final_metrics;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  /// Block counts per operator kind, keyed "nodal:<token>", "pool:<token>",
  /// "activation:<token>".
  std::map<std::string, std::size_t> operator_histogram;
  TrainLog final_finetune;
  double wall_time = 0.0;
};

/// Called after every growth step with the single-layer stage network before
/// and after the step (identical when the step was rejected). `before` is null
/// for the first block of a layer.
struct StepEvent {
  const StepRecord& record;
  const GopNetwork* before;
  const GopNetwork& after;
  const Matrix& features_train;
};
using StepObserver = std::function<void(const StepEvent&)>;

std::pair<GopNetwork, ProgressionReport> run_progression(const TrainingData& data, const ProgressionConfig& config,
                                                         const StepObserver& observer = {});

/// Histogram of hidden-block operator kinds, one count per block.
std::map<std::string, std::size_t> operator_histogram(const GopNetwork& net);

/// MSE and accuracy of the network's inference-mode outputs on one split.
SplitMetrics evaluate_split(const GopNetwork& net, const LabeledSet& split);
FinalMetrics evaluate_splits(const GopNetwork& net, const TrainingData& data);

}  // namespace gop
