#include "gop/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "gop/errors.hpp"
#include "gop/random.hpp"

namespace gop {

namespace {

constexpr std::uint64_t kTagInit = 0x1417;
constexpr std::uint64_t kTagTrain = 0x7a14;
constexpr std::uint64_t kTagGis = 0x6150;
constexpr std::uint64_t kTagFinalTune = 0xf1a2;

using Clock = std::chrono::steady_clock;

struct Stage {
  GopNetwork net;
  double loss;
};

struct LayerData {
  const LabeledSet& train;
  const std::optional<LabeledSet>& val;
  std::size_t layer_index;
};

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = rng.uniform(-bound, bound);
}

// Trains a single-hidden-layer network from a deterministic initialization
// that depends only on the layer and the two operator sets.
Stage train_shln(const LayerData& d, std::size_t width, OperatorSet hidden, OperatorSet output,
                 const LayerwiseConfig& config) {
  const auto fan_in = d.train.X.cols();
  const auto classes = d.train.Y.cols();
  const auto w = static_cast<Eigen::Index>(width);
  Rng rng(derive_seed({config.seed, kTagInit, d.layer_index, hidden.index(), output.index()}));

  NeuronBlock block{hidden, Matrix(fan_in, w), Vector::Zero(w)};
  fill_uniform(block.weights, std::sqrt(6.0 / static_cast<double>(fan_in + w)), rng);
  Matrix out_w(w, classes);
  fill_uniform(out_w, std::sqrt(6.0 / static_cast<double>(w + classes)), rng);
  GopLayer layer{{std::move(block)}, NormState::identity(width)};
  GopNetwork net(static_cast<std::size_t>(fan_in), {std::move(layer)}, std::move(out_w), Vector::Zero(classes),
                 output);

  TrainSpec spec = config.train_spec;
  spec.schedule = {{config.train_spec.schedule.front().learning_rate, config.epochs_per_candidate}};
  spec.seed = derive_seed({config.seed, kTagTrain, d.layer_index, hidden.index(), output.index()});
  if (d.layer_index > 0) spec.dropout_input = spec.dropout_hidden;
  TrainableSelection sel;
  sel.blocks.insert({0, 0});
  sel.include_norm = false;

  double loss = std::numeric_limits<double>::infinity();
  try {
    finetune(net, d.train, d.val, spec, sel);
    const LabeledSet& s = d.val ? *d.val : d.train;
    loss = mse(network_forward(net, s.X), s.Y);
    if (!std::isfinite(loss)) loss = std::numeric_limits<double>::infinity();
  } catch (const NonFiniteLoss&) {
  }
  return {std::move(net), loss};
}

// Two-pass greedy iterative search for one layer.
Stage gis(const LayerData& d, std::size_t width, const std::vector<OperatorSet>& library,
          const LayerwiseConfig& config, ProgressionReport& report) {
  Rng rng(derive_seed({config.seed, kTagGis, d.layer_index}));
  OperatorSet hidden = library[rng.below(library.size())];
  OperatorSet output = kPerceptronSet;
  std::optional<Stage> chosen;

  for (std::size_t pass = 1; pass <= 2; ++pass) {
    for (const char* phase : {"output", "hidden"}) {
      const bool output_phase = std::string(phase) == "output";
      std::optional<Stage> best;
      for (const OperatorSet& op : library) {
        const OperatorSet h = output_phase ? hidden : op;
        const OperatorSet o = output_phase ? op : output;
        Stage s = train_shln(d, width, h, o, config);
        report.candidate_trainings.push_back({d.layer_index, pass, phase, h, o, s.loss});
        if (!best || s.loss < best->loss) best = std::move(s);
      }
      if (output_phase) {
        output = *best->net.output_op_set();
      } else {
        hidden = best->net.layer(0).blocks.front().op_set;
      }
      chosen = std::move(best);
    }
  }
  return std::move(*chosen);
}

std::pair<GopNetwork, ProgressionReport> run_layerwise(const TrainingData& data, const LayerwiseConfig& config,
                                                       bool search) {
  config.validate();
  if (data.train.size() == 0) throw EmptyInput("training split is empty");
  const auto t0 = Clock::now();
  const std::vector<OperatorSet> library = search ? (config.library ? *config.library : enumerate_operator_sets())
                                                  : std::vector<OperatorSet>{kPerceptronSet};

  ProgressionReport report;
  report.algorithm = search ? "pop" : "pmlp";
  report.seed = config.seed;

  LabeledSet train = data.train;
  std::optional<LabeledSet> val = data.val;
  std::vector<GopLayer> layers;
  std::optional<GopNetwork> last;
  double previous = std::numeric_limits<double>::quiet_NaN();
  report.template_exhausted = true;

  for (std::size_t l = 0; l < config.template_widths.size(); ++l) {
    const LayerData d{train, val, l};
    Stage stage = search ? gis(d, config.template_widths[l], library, config, report)
                         : train_shln(d, config.template_widths[l], kPerceptronSet, kPerceptronSet, config);
    const double train_mse = mse(network_forward(stage.net, train.X), train.Y);

    LayerRecord rec;
    rec.layer_index = l;
    rec.width = stage.net.layer(0).width();
    rec.blocks = 1;
    rec.metric_before = previous;
    rec.metric_after = train_mse;
    rec.accepted = true;
    report.layers.push_back(rec);
    previous = train_mse;

    const GopLayer& layer = stage.net.layer(0);
    train.X = layer_forward(layer, train.X);
    if (val) val->X = layer_forward(layer, val->X);
    layers.push_back(layer);
    last = std::move(stage.net);
    if (train_mse <= config.target_mse) {
      report.template_exhausted = false;
      break;
    }
  }

  GopNetwork net(static_cast<std::size_t>(data.train.X.cols()), std::move(layers), last->output_weights(),
                 last->output_bias(), last->output_op_set());
  TrainSpec spec = config.train_spec;
  spec.seed = derive_seed({config.seed, kTagFinalTune});
  TrainableSelection sel = TrainableSelection::everything(net);
  sel.include_norm = false;
  const GopNetwork snapshot = net;
  try {
    report.final_finetune = finetune(net, data.train, data.val, spec, sel);
  } catch (const NonFiniteLoss&) {
    net = snapshot;
    report.final_finetune = TrainLog{};
  }

  report.final_metrics = evaluate_splits(net, data);
  report.params = count_params(net);
  report.flops = count_flops(net);
  report.operator_histogram = operator_histogram(net);
  report.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return {std::move(net), std::move(report)};
}

}  // namespace

void LayerwiseConfig::validate() const {
  if (template_widths.empty()) throw ConfigError("layer template is empty");
  for (auto w : template_widths)
    if (w == 0) throw ConfigError("template widths must be positive");
  if (!(target_mse >= 0.0)) throw ConfigError("target_mse must be >= 0");
  if (epochs_per_candidate == 0) throw ConfigError("epochs_per_candidate must be positive");
  if (library && library->empty()) throw ConfigError("operator library restriction is empty");
  train_spec.validate();
}

std::pair<GopNetwork, ProgressionReport> run_pop_baseline(const TrainingData& data, const LayerwiseConfig& config) {
  return run_layerwise(data, config, true);
}

std::pair<GopNetwork, ProgressionReport> run_pmlp_baseline(const TrainingData& data, const LayerwiseConfig& config) {
  return run_layerwise(data, config, false);
}

}  // namespace gop
