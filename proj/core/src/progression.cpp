#include "gop/progression.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "gop/errors.hpp"
#include "gop/random.hpp"

namespace gop {

namespace {

// Tags mixed into derived seeds so the different random streams never collide.
constexpr std::uint64_t kTagSearch = 0x5ea4c;
constexpr std::uint64_t kTagStepTune = 0x57e9;
constexpr std::uint64_t kTagFinalTune = 0xf1a1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double metric_of(const Matrix& predictions, const Matrix& targets, RateMetric metric) {
  return metric == RateMetric::Loss ? mse(predictions, targets) : accuracy(predictions, targets);
}

Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  if (a.cols() > 0) out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

// Improvement rate that maps a zero baseline to "no improvement".
double safe_rate(double before, double after, RateMetric metric) {
  try {
    const double r = improvement_rate(before, after, metric);
    return std::isfinite(r) ? r : 0.0;
  } catch (const DegenerateBaseline&) {
    return 0.0;
  }
}

void check_data(const TrainingData& data) {
  if (data.train.size() == 0) throw EmptyInput("training split is empty");
  if (data.train.Y.rows() != data.train.X.rows())
    throw DimensionMismatch("training inputs and targets have different row counts");
  if (data.train.Y.cols() == 0) throw DimensionMismatch("targets need at least one column");
  for (const auto* split : {data.val ? &*data.val : nullptr, data.test ? &*data.test : nullptr}) {
    if (split == nullptr) continue;
    if (split->X.cols() != data.train.X.cols() || split->Y.cols() != data.train.Y.cols() ||
        split->X.rows() != split->Y.rows())
      throw DimensionMismatch("evaluation split shape differs from the training split");
  }
}

// Inputs of the layer being grown on the training and selection splits.
struct LayerInputs {
  Matrix train;
  std::optional<Matrix> val;
};

class LayerGrower {
 public:
  LayerGrower(const TrainingData& data, const LayerInputs& inputs, std::size_t layer_index,
              const ProgressionConfig& config, ProgressionReport& report, const StepObserver& observer)
      : data_(data), in_(inputs), layer_(layer_index), config_(config), report_(report), observer_(observer) {}

  // Grows one layer from scratch; `metric_before` is the rate metric of the
  // network without this layer.
  GopNetwork grow(double metric_before) {
    const std::vector<OperatorSet> library = config_.effective_library();
    const Matrix& Y = data_.train.Y;
    const Matrix* Y_val = data_.val ? &data_.val->Y : nullptr;
    std::optional<GopNetwork> stage;
    double current = metric_before;
    std::size_t width = 0;

    for (std::size_t step = 0;; ++step) {
      const std::size_t w = step == 0 ? config_.n_min : config_.n_i;
      if (step > 0 && width + w > config_.max_layer_width) break;
      const auto t0 = Clock::now();

      const Matrix existing_train =
          stage ? layer_forward(stage->layer(0), in_.train) : Matrix(in_.train.rows(), 0);
      Matrix existing_val;
      if (in_.val) existing_val = stage ? layer_forward(stage->layer(0), *in_.val) : Matrix(in_.val->rows(), 0);

      SearchContext ctx{in_.train, Y, existing_train};
      if (in_.val) {
        ctx.features_val = &*in_.val;
        ctx.targets_val = Y_val;
        ctx.existing_val = &existing_val;
      }
      ctx.layer_index = layer_;
      ctx.step = step;

      std::vector<OperatorSet> step_library = library;
      if (stage && is_homogeneous(config_.variant)) step_library = {stage->layer(0).blocks.front().op_set};
      SearchResult found = search_operator_set(ctx, w, step_library, config_);

      GopNetwork candidate = stage ? *stage : make_stage(found);
      if (stage) {
        GopLayer& layer = candidate.layer(0);
        layer.blocks.push_back(found.block);
        layer.norm.append(found.norm);
        candidate.output_weights() = found.evaluation.B;
        candidate.output_bias() = found.evaluation.bias;
      }

      bool ok = true;
      if (finetunes_each_step(config_.variant)) {
        TrainSpec spec = config_.train_spec;
        spec.seed = derive_seed({config_.seed, kTagStepTune, layer_, step});
        // Deeper layers read frozen hidden features; dropout acts on the
        // output of the layer being grown only.
        if (layer_ > 0) spec.dropout_input = 0.0;
        TrainableSelection sel;
        sel.blocks.insert({0, candidate.layer(0).blocks.size() - 1});
        try {
          finetune(candidate, LabeledSet{in_.train, Y}, selection_set(), spec, sel);
        } catch (const NonFiniteLoss&) {
          if (step == 0) throw;
          ok = false;
        }
      }

      StepRecord rec;
      rec.layer_index = layer_;
      rec.step = step;
      rec.block_width = w;
      rec.candidate_scores = std::move(found.candidate_scores);
      rec.chosen_op_set = found.block.op_set;
      rec.best_c = found.evaluation.best_c;
      rec.loss_before = current;
      rec.loss_after = ok ? metric(candidate) : std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(rec.loss_after)) ok = false;
      rec.r_value = ok ? safe_rate(current, rec.loss_after, config_.rate_metric) : 0.0;
      // The first block of a layer has nothing to be compared against.
      rec.accepted = step == 0 || (ok && rec.r_value >= config_.eps_n);
      if (!ok) rec.loss_after = current;
      rec.wall_time = seconds_since(t0);
      report_.steps.push_back(rec);

      if (rec.accepted) {
        std::optional<GopNetwork> before = std::move(stage);
        stage = std::move(candidate);
        current = rec.loss_after;
        width += w;
        if (observer_) observer_(StepEvent{rec, before ? &*before : nullptr, *stage, in_.train});
      } else {
        if (observer_) observer_(StepEvent{rec, &*stage, *stage, in_.train});
        break;
      }
    }
    return std::move(*stage);
  }

  double metric(const GopNetwork& stage) const {
    const Matrix& X = in_.val ? *in_.val : in_.train;
    const Matrix& Y = data_.val ? data_.val->Y : data_.train.Y;
    return metric_of(network_forward(stage, X), Y, config_.rate_metric);
  }

 private:
  GopNetwork make_stage(const SearchResult& found) const {
    GopLayer layer{{found.block}, found.norm};
    return GopNetwork(static_cast<std::size_t>(in_.train.cols()), {std::move(layer)}, found.evaluation.B,
                      found.evaluation.bias);
  }

  std::optional<LabeledSet> selection_set() const {
    if (!in_.val) return std::nullopt;
    return LabeledSet{*in_.val, data_.val->Y};
  }

  const TrainingData& data_;
  const LayerInputs& in_;
  std::size_t layer_;
  const ProgressionConfig& config_;
  ProgressionReport& report_;
  const StepObserver& observer_;
};

}  // namespace

bool is_homogeneous(Variant v) noexcept { return v == Variant::HoMLGOP || v == Variant::HoMLRN; }
bool finetunes_each_step(Variant v) noexcept { return v == Variant::HeMLGOP || v == Variant::HoMLGOP; }

std::string to_token(Variant v) {
  switch (v) {
    case Variant::HeMLGOP: return "hemlgop";
    case Variant::HoMLGOP: return "homlgop";
    case Variant::HeMLRN: return "hemlrn";
    case Variant::HoMLRN: return "homlrn";
  }
  return "?";
}

Variant parse_variant(const std::string& token) {
  for (Variant v : {Variant::HeMLGOP, Variant::HoMLGOP, Variant::HeMLRN, Variant::HoMLRN})
    if (to_token(v) == token) return v;
  throw ConfigError("unknown progression variant '" + token + "'");
}

std::string to_token(RateMetric m) { return m == RateMetric::Loss ? "loss" : "accuracy"; }

RateMetric parse_rate_metric(const std::string& token) {
  if (token == "loss") return RateMetric::Loss;
  if (token == "accuracy") return RateMetric::Accuracy;
  throw ConfigError("unknown rate metric '" + token + "'");
}

void ProgressionConfig::validate() const {
  if (n_min == 0 || n_i == 0) throw ConfigError("n_min and n_i must be at least 1");
  if (n_min > max_layer_width) throw ConfigError("n_min exceeds max_layer_width");
  if (max_layers == 0) throw ConfigError("max_layers must be at least 1");
  if (!(eps_n >= 0.0) || !(eps_l >= 0.0)) throw ConfigError("improvement thresholds must be >= 0");
  if (c_grid.empty()) throw ConfigError("c_grid is empty");
  for (double c : c_grid)
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("c_grid values must be finite and >= 0");
  if (library && library->empty()) throw ConfigError("operator library restriction is empty");
  train_spec.validate();
}

std::vector<OperatorSet> ProgressionConfig::effective_library() const {
  return library ? *library : enumerate_operator_sets();
}

double improvement_rate(double before, double after, RateMetric metric) {
  if (before == 0.0) throw DegenerateBaseline("improvement rate against a zero baseline");
  return metric == RateMetric::Loss ? (before - after) / before : (after - before) / before;
}

SearchResult search_operator_set(const SearchContext& ctx, std::size_t width,
                                 const std::vector<OperatorSet>& library, const ProgressionConfig& config) {
  if (width == 0) throw ConfigError("block width must be at least 1");
  if (library.empty()) throw ConfigError("empty operator library");
  const bool has_val = ctx.features_val != nullptr;
  if (has_val && (ctx.targets_val == nullptr || ctx.existing_val == nullptr))
    throw ConfigError("incomplete validation split in search context");

  const auto fan_in = ctx.features_train.cols();
  const auto w = static_cast<Eigen::Index>(width);
  CandidateOptions options;
  options.c_grid = config.c_grid;
  options.metric = config.search_metric;

  SearchResult best;
  best.candidate_scores.assign(kNumOperatorSets, std::nullopt);
  bool found = false;
  const double failed = -std::numeric_limits<double>::infinity();

  // Candidates that share nodal and pool operators share one weight draw, so
  // their pre-activations are computed once and compared on equal footing.
  std::map<std::size_t, std::vector<OperatorSet>> groups;
  for (const OperatorSet& op : library) groups[op.index() / kNumActivation].push_back(op);

  for (const auto& [group, members] : groups) {
    Rng rng(derive_seed({config.seed, kTagSearch, ctx.layer_index, ctx.step, group}));
    NeuronBlock block{members.front(), Matrix(fan_in, w), Vector(w)};
    for (Eigen::Index j = 0; j < block.weights.size(); ++j) block.weights.data()[j] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index j = 0; j < w; ++j) block.bias[j] = rng.uniform(-1.0, 1.0);
    Matrix pre_train, pre_val;
    block_forward(block, ctx.features_train, pre_train);
    if (has_val) block_forward(block, *ctx.features_val, pre_val);

    for (const OperatorSet& op : members) {
      const std::size_t idx = op.index();
      auto activate = [&](const Matrix& pre) {
        return pre.unaryExpr([&](double x) { return activation_forward(op.activation, x); }).eval();
      };
      const Matrix raw = activate(pre_train);
      if (!raw.allFinite()) {
        best.candidate_scores[idx] = failed;
        continue;
      }
      NormState norm = NormState::fit(raw);
      const Matrix H = hcat(ctx.existing_train, norm.apply(raw));
      Matrix H_val;
      std::optional<ScoringSet> scoring;
      if (has_val) {
        H_val = hcat(*ctx.existing_val, norm.apply(activate(pre_val)));
        scoring.emplace(ScoringSet{H_val, *ctx.targets_val});
      }

      CandidateEvaluation eval;
      try {
        eval = evaluate_candidate(H, ctx.targets_train, options, scoring);
      } catch (const SingularSystem&) {
        best.candidate_scores[idx] = failed;
        continue;
      }
      if (!std::isfinite(eval.score)) {
        best.candidate_scores[idx] = failed;
        continue;
      }
      best.candidate_scores[idx] = eval.score;
      if (!found || eval.score > best.evaluation.score ||
          (eval.score == best.evaluation.score && idx < best.block.op_set.index())) {
        best.block = block;
        best.block.op_set = op;
        best.norm = std::move(norm);
        best.evaluation = std::move(eval);
        found = true;
      }
    }
  }
  if (!found) throw AllCandidatesFailed("every operator set candidate failed to produce a finite solution");
  return best;
}

std::map<std::string, std::size_t> operator_histogram(const GopNetwork& net) {
  std::map<std::string, std::size_t> hist;
  for (const auto& layer : net.layers()) {
    for (const auto& block : layer.blocks) {
      ++hist["nodal:" + std::string(to_token(block.op_set.nodal))];
      ++hist["pool:" + std::string(to_token(block.op_set.pool))];
      ++hist["activation:" + std::string(to_token(block.op_set.activation))];
    }
  }
  return hist;
}

SplitMetrics evaluate_split(const GopNetwork& net, const LabeledSet& split) {
  const Matrix out = network_forward(net, split.X);
  return SplitMetrics{mse(out, split.Y), accuracy(out, split.Y)};
}

FinalMetrics evaluate_splits(const GopNetwork& net, const TrainingData& data) {
  auto eval = [&](const LabeledSet& s) { return evaluate_split(net, s); };
  FinalMetrics m;
  m.train = eval(data.train);
  if (data.val) m.val = eval(*data.val);
  if (data.test) m.test = eval(*data.test);
  return m;
}

std::pair<GopNetwork, ProgressionReport> run_progression(const TrainingData& data, const ProgressionConfig& config,
                                                         const StepObserver& observer) {
  config.validate();
  check_data(data);
  const auto t0 = Clock::now();

  ProgressionReport report;
  report.algorithm = to_token(config.variant);
  report.seed = config.seed;

  // Rate metric of the constant predictor that outputs the training mean.
  const LabeledSet& sel = data.selection_split();
  const Vector mean = data.train.Y.colwise().mean().transpose();
  const Matrix constant = mean.transpose().replicate(sel.Y.rows(), 1);
  double metric_before = metric_of(constant, sel.Y, config.rate_metric);

  LayerInputs inputs{data.train.X, std::nullopt};
  if (data.val) inputs.val = data.val->X;

  std::vector<GopLayer> layers;
  Matrix out_weights;
  Vector out_bias;
  for (std::size_t l = 0; l < config.max_layers; ++l) {
    LayerGrower grower(data, inputs, l, config, report, observer);
    GopNetwork stage = grower.grow(metric_before);
    const double metric_after = grower.metric(stage);

    LayerRecord rec;
    rec.layer_index = l;
    rec.width = stage.layer(0).width();
    rec.blocks = stage.layer(0).blocks.size();
    rec.metric_before = metric_before;
    rec.metric_after = metric_after;
    rec.r_value = safe_rate(metric_before, metric_after, config.rate_metric);
    rec.accepted = l == 0 || rec.r_value >= config.eps_l;
    report.layers.push_back(rec);
    if (!rec.accepted) break;

    inputs.train = layer_forward(stage.layer(0), inputs.train);
    if (inputs.val) inputs.val = layer_forward(stage.layer(0), *inputs.val);
    layers.push_back(std::move(stage.layer(0)));
    out_weights = stage.output_weights();
    out_bias = stage.output_bias();
    metric_before = metric_after;
  }

  GopNetwork net(static_cast<std::size_t>(data.train.X.cols()), std::move(layers), std::move(out_weights),
                 std::move(out_bias));

  TrainSpec spec = config.train_spec;
  spec.seed = derive_seed({config.seed, kTagFinalTune});
  const GopNetwork snapshot = net;
  try {
    report.final_finetune = finetune(net, data.train, data.val, spec, TrainableSelection::everything(net));
  } catch (const NonFiniteLoss&) {
    // Keep the progressively learned network if the joint finetune diverges.
    net = snapshot;
    report.final_finetune = TrainLog{};
  }

  report.final_metrics = evaluate_splits(net, data);
  report.params = count_params(net);
  report.flops = count_flops(net);
  report.operator_histogram = operator_histogram(net);
  report.wall_time = seconds_since(t0);
  return {std::move(net), std::move(report)};
}

}  // namespace gop
