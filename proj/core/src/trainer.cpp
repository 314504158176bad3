#include "gop/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kernels.hpp"

namespace gop {

void TrainSpec::validate() const {
  if (schedule.empty()) throw ConfigError("training schedule is empty");
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& stage : schedule) {
    if (!(stage.learning_rate >= 0.0) || !std::isfinite(stage.learning_rate))
      throw ConfigError("learning rates must be finite and non-negative");
    if (stage.learning_rate > prev) throw ConfigError("learning rates must be non-increasing");
    if (stage.epochs == 0) throw ConfigError("every schedule stage needs at least one epoch");
    prev = stage.learning_rate;
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(dropout_hidden >= 0.0 && dropout_hidden < 1.0)) throw ConfigError("dropout_hidden must be in [0, 1)");
  if (!(dropout_input >= 0.0 && dropout_input < 1.0)) throw ConfigError("dropout_input must be in [0, 1)");
  if (weight_reg.kind != WeightReg::Kind::None && !(weight_reg.value >= 0.0))
    throw ConfigError("weight regularization value must be non-negative");
  if (weight_reg.kind == WeightReg::Kind::MaxNorm && !(weight_reg.value > 0.0))
    throw ConfigError("max-norm bound must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ConfigError("bn_momentum must be in [0, 1]");
  if (!(bn_epsilon >= 0.0)) throw ConfigError("bn_epsilon must be non-negative");
}

std::size_t TrainSpec::total_epochs() const noexcept {
  std::size_t n = 0;
  for (const auto& s : schedule) n += s.epochs;
  return n;
}

TrainableSelection TrainableSelection::everything(const GopNetwork& net) {
  TrainableSelection sel;
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    for (std::size_t b = 0; b < net.layer(l).blocks.size(); ++b) sel.blocks.insert({l, b});
  return sel;
}

TrainableSelection TrainableSelection::output_only() {
  TrainableSelection sel;
  sel.include_norm = false;
  return sel;
}

const BlockGradient* Gradients::find(BlockRef ref) const noexcept {
  for (const auto& g : blocks)
    if (g.ref == ref) return &g;
  return nullptr;
}

void init_batchnorm_from_standardization(GopLayer& layer) {
  const std::size_t width = layer.width();
  if (!layer.norm.is_fitted_for(width)) throw UnfitNormalization("layer normalization was never fitted");
  if (layer.norm.mode == NormMode::BatchNorm) return;
  const auto w = static_cast<Eigen::Index>(width);
  layer.norm.scale = Vector::Ones(w);
  layer.norm.shift = Vector::Zero(w);
  layer.norm.mode = NormMode::BatchNorm;
}

double loss_value(const Matrix& outputs, const Matrix& targets, LossKind loss) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw DimensionMismatch("loss: output and target shapes differ");
  if (loss == LossKind::MSE) return mse(outputs, targets);
  double total = 0.0;
  for (Eigen::Index n = 0; n < outputs.rows(); ++n) {
    const double m = outputs.row(n).maxCoeff();
    const double lse = m + std::log((outputs.row(n).array() - m).exp().sum());
    for (Eigen::Index c = 0; c < outputs.cols(); ++c) total -= targets(n, c) * (outputs(n, c) - lse);
  }
  return total / static_cast<double>(outputs.rows());
}

namespace {

Matrix loss_gradient(const Matrix& outputs, const Matrix& targets, LossKind loss) {
  const double n = static_cast<double>(outputs.rows());
  if (loss == LossKind::MSE) return 2.0 * (outputs - targets) / (n * static_cast<double>(outputs.cols()));
  Matrix g(outputs.rows(), outputs.cols());
  for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
    const double m = outputs.row(r).maxCoeff();
    Eigen::RowVectorXd p = (outputs.row(r).array() - m).exp();
    p /= p.sum();
    g.row(r) = (p * targets.row(r).sum() - targets.row(r)) / n;
  }
  return g;
}

struct LayerCache {
  Matrix input_t;  // fan_in x B
  std::vector<Matrix> pre;
  Matrix raw;   // B x W, before normalization
  Matrix xhat;  // batch-normalized values for batch-stat columns
  std::vector<char> batch_stat;
  Vector batch_mean;
  Vector batch_var;
  Vector inv_std;  // 1 / sqrt(var + eps) for batch-stat columns
  Matrix mask;     // hidden dropout mask (empty when disabled)
  Matrix out;      // B x W
};

struct ForwardState {
  std::size_t first = 0;
  std::vector<LayerCache> layers;  // layers[first..L)
  Matrix last_hidden;              // input to the output map
  Matrix output_pre;               // GOP output pre-activations
  Matrix output;
};

std::size_t first_trainable_layer(const GopNetwork& net, const TrainableSelection& sel) {
  std::size_t f = net.num_layers();
  for (const auto& ref : sel.blocks) f = std::min(f, ref.layer);
  return f;
}

void check_selection(const GopNetwork& net, const TrainableSelection& sel) {
  for (const auto& ref : sel.blocks) {
    if (ref.layer >= net.num_layers() || ref.block >= net.layer(ref.layer).blocks.size())
      throw ConfigError("trainable selection references missing block (layer " + std::to_string(ref.layer) +
                        ", block " + std::to_string(ref.block) + ")");
  }
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < mask.size(); ++j) mask.data()[j] = rng.bernoulli(rate) ? 0.0 : keep;
  return mask;
}

bool uses_batch_stats(const GopNetwork& net, const TrainableSelection& sel, const PassMode& mode,
                      std::size_t layer, std::size_t block) {
  return mode.batch_norm_training && sel.include_norm &&
         net.layer(layer).norm.mode == NormMode::BatchNorm && sel.blocks.count({layer, block}) > 0;
}

// `frozen_raw`, when given, holds the (batch) outputs of the unselected blocks
// of layer `first`; it is only valid when that layer's input is not dropped out.
ForwardState forward_train(const GopNetwork& net, std::size_t first, const Matrix& features,
                           const TrainableSelection& sel, const PassMode& mode,
                           const Matrix* frozen_raw = nullptr) {
  ForwardState st;
  st.first = first;
  const std::size_t L = net.num_layers();
  const bool need_rng = mode.dropout_input > 0.0 || mode.dropout_hidden > 0.0;
  if (need_rng && mode.rng == nullptr) throw ConfigError("dropout requires a random generator");

  Matrix a = features;
  if (first < L && mode.dropout_input > 0.0) a.array() *= dropout_mask(a.rows(), a.cols(), mode.dropout_input, *mode.rng).array();
  if (first == L && mode.dropout_hidden > 0.0)
    a.array() *= dropout_mask(a.rows(), a.cols(), mode.dropout_hidden, *mode.rng).array();

  const Eigen::Index batch = a.rows();
  for (std::size_t l = first; l < L; ++l) {
    const GopLayer& layer = net.layer(l);
    const std::size_t width = layer.width();
    if (!layer.norm.is_fitted_for(width))
      throw UnfitNormalization("layer " + std::to_string(l) + " normalization was never fitted");
    LayerCache c;
    c.input_t = a.transpose();
    c.raw.resize(batch, static_cast<Eigen::Index>(width));
    c.pre.resize(layer.blocks.size());
    c.batch_stat.assign(width, 0);
    Matrix out_b;
    for (std::size_t b = 0; b < layer.blocks.size(); ++b) {
      const auto off = static_cast<Eigen::Index>(layer.block_offset(b));
      const auto bw = static_cast<Eigen::Index>(layer.blocks[b].width());
      if (frozen_raw != nullptr && l == first && sel.blocks.count({l, b}) == 0) {
        c.raw.middleCols(off, bw) = frozen_raw->middleCols(off, bw);
        continue;
      }
      detail::block_forward_kernel(layer.blocks[b], c.input_t, c.pre[b], out_b);
      c.raw.middleCols(off, bw) = out_b;
      if (uses_batch_stats(net, sel, mode, l, b))
        std::fill_n(c.batch_stat.begin() + off, layer.blocks[b].width(), 1);
    }

    const NormState& norm = layer.norm;
    c.out.resize(batch, static_cast<Eigen::Index>(width));
    c.xhat.resize(batch, static_cast<Eigen::Index>(width));
    c.batch_mean = Vector::Zero(static_cast<Eigen::Index>(width));
    c.batch_var = Vector::Zero(static_cast<Eigen::Index>(width));
    c.inv_std = Vector::Zero(static_cast<Eigen::Index>(width));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(width); ++j) {
      auto h = c.raw.col(j).array();
      if (c.batch_stat[static_cast<std::size_t>(j)]) {
        const double mu = h.mean();
        const double var = (h - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + mode.bn_epsilon);
        c.batch_mean[j] = mu;
        c.batch_var[j] = var;
        c.inv_std[j] = inv;
        c.xhat.col(j) = (h - mu) * inv;
        c.out.col(j) = norm.scale[j] * c.xhat.col(j).array() + norm.shift[j];
      } else if (norm.mode == NormMode::Standardize) {
        c.out.col(j) = (h - norm.mean[j]) / norm.std[j];
      } else {
        c.out.col(j) = norm.scale[j] * ((h - norm.mean[j]) / norm.std[j]) + norm.shift[j];
      }
    }
    if (mode.dropout_hidden > 0.0) {
      c.mask = dropout_mask(c.out.rows(), c.out.cols(), mode.dropout_hidden, *mode.rng);
      c.out.array() *= c.mask.array();
    }
    a = c.out;
    st.layers.push_back(std::move(c));
  }

  st.last_hidden = std::move(a);
  if (net.output_op_set()) {
    NeuronBlock ob{*net.output_op_set(), net.output_weights(), net.output_bias()};
    const Matrix in_t = st.last_hidden.transpose();
    detail::block_forward_kernel(ob, in_t, st.output_pre, st.output);
  } else {
    st.output = st.last_hidden * net.output_weights();
    st.output.rowwise() += net.output_bias().transpose();
  }
  return st;
}

Gradients backward_from(const GopNetwork& net, const ForwardState& st, const Matrix& Y,
                        const TrainableSelection& sel, LossKind loss) {
  Gradients grads;
  grads.loss = loss_value(st.output, Y, loss);
  const Matrix d_out = loss_gradient(st.output, Y, loss);
  const std::size_t L = net.num_layers();
  const bool need_hidden_grad = st.first < L;

  Matrix d_hidden;
  if (net.output_op_set()) {
    NeuronBlock ob{*net.output_op_set(), net.output_weights(), net.output_bias()};
    Matrix dW = Matrix::Zero(ob.weights.rows(), ob.weights.cols());
    Vector db = Vector::Zero(ob.bias.size());
    Matrix d_in_t;
    if (need_hidden_grad) d_in_t = Matrix::Zero(st.last_hidden.cols(), st.last_hidden.rows());
    const Matrix in_t = st.last_hidden.transpose();
    detail::block_backward_kernel(ob, in_t, st.output_pre, d_out, dW, db, need_hidden_grad ? &d_in_t : nullptr);
    if (sel.include_output) {
      grads.d_output_weights = std::move(dW);
      grads.d_output_bias = std::move(db);
    }
    if (need_hidden_grad) d_hidden = d_in_t.transpose();
  } else {
    if (sel.include_output) {
      grads.d_output_weights = st.last_hidden.transpose() * d_out;
      grads.d_output_bias = d_out.colwise().sum().transpose();
    }
    if (need_hidden_grad) d_hidden = d_out * net.output_weights().transpose();
  }

  for (std::size_t l = L; l-- > st.first;) {
    const GopLayer& layer = net.layer(l);
    const LayerCache& c = st.layers[l - st.first];
    const NormState& norm = layer.norm;
    const Eigen::Index batch = c.out.rows();
    const auto width = static_cast<Eigen::Index>(layer.width());

    Matrix d_norm_out = d_hidden;
    if (c.mask.size() > 0) d_norm_out.array() *= c.mask.array();

    Matrix d_raw(batch, width);
    Vector d_scale = Vector::Zero(width);
    Vector d_shift = Vector::Zero(width);
    for (Eigen::Index j = 0; j < width; ++j) {
      auto g = d_norm_out.col(j).array();
      if (c.batch_stat[static_cast<std::size_t>(j)]) {
        auto xh = c.xhat.col(j).array();
        d_scale[j] = (g * xh).sum();
        d_shift[j] = g.sum();
        const Eigen::ArrayXd dxhat = g * norm.scale[j];
        const double n = static_cast<double>(batch);
        d_raw.col(j) = (c.inv_std[j] / n) * (n * dxhat - dxhat.sum() - xh * (dxhat * xh).sum());
      } else if (norm.mode == NormMode::Standardize) {
        d_raw.col(j) = g / norm.std[j];
      } else {
        d_raw.col(j) = g * (norm.scale[j] / norm.std[j]);
      }
    }

    const bool need_input_grad = l > st.first;
    Matrix d_in_t;
    if (need_input_grad) d_in_t = Matrix::Zero(c.input_t.rows(), c.input_t.cols());
    for (std::size_t b = 0; b < layer.blocks.size(); ++b) {
      const NeuronBlock& block = layer.blocks[b];
      const bool selected = sel.blocks.count({l, b}) > 0;
      if (!selected && !need_input_grad) continue;
      const auto off = static_cast<Eigen::Index>(layer.block_offset(b));
      const auto bw = static_cast<Eigen::Index>(block.width());
      const Matrix d_slice = d_raw.middleCols(off, bw);
      BlockGradient bg;
      bg.ref = {l, b};
      bg.d_weights = Matrix::Zero(block.weights.rows(), block.weights.cols());
      bg.d_bias = Vector::Zero(bw);
      detail::block_backward_kernel(block, c.input_t, c.pre[b], d_slice, bg.d_weights, bg.d_bias,
                                    need_input_grad ? &d_in_t : nullptr);
      if (selected) {
        if (sel.include_norm && c.batch_stat[static_cast<std::size_t>(off)]) {
          bg.d_scale = d_scale.segment(off, bw);
          bg.d_shift = d_shift.segment(off, bw);
        }
        grads.blocks.push_back(std::move(bg));
      }
    }
    if (need_input_grad) d_hidden = d_in_t.transpose();
  }
  std::sort(grads.blocks.begin(), grads.blocks.end(),
            [](const BlockGradient& a, const BlockGradient& b) { return a.ref < b.ref; });
  return grads;
}

void check_batch(const GopNetwork& net, const Matrix& X, const Matrix& Y) {
  if (X.rows() == 0) throw EmptyInput("empty batch");
  if (X.rows() != Y.rows()) throw DimensionMismatch("batch inputs and targets have different row counts");
  if (static_cast<std::size_t>(Y.cols()) != net.num_outputs())
    throw DimensionMismatch("targets have " + std::to_string(Y.cols()) + " columns, network has " +
                            std::to_string(net.num_outputs()) + " outputs");
  if (static_cast<std::size_t>(X.cols()) != net.input_dim())
    throw DimensionMismatch("inputs have " + std::to_string(X.cols()) + " columns, network expects " +
                            std::to_string(net.input_dim()));
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

void project_max_norm(Matrix& w, double bound) {
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    const double n = w.col(c).norm();
    if (n > bound) w.col(c) *= bound / n;
  }
}

}  // namespace

double batch_loss(const GopNetwork& net, const Matrix& X, const Matrix& Y, const TrainableSelection& selection,
                  LossKind loss, const PassMode& mode) {
  check_batch(net, X, Y);
  check_selection(net, selection);
  const std::size_t first = first_trainable_layer(net, selection);
  const Matrix features = hidden_forward(net, X, first);
  return loss_value(forward_train(net, first, features, selection, mode).output, Y, loss);
}

Gradients backward(const GopNetwork& net, const Matrix& X, const Matrix& Y, const TrainableSelection& selection,
                   LossKind loss, const PassMode& mode) {
  check_batch(net, X, Y);
  check_selection(net, selection);
  const std::size_t first = first_trainable_layer(net, selection);
  const Matrix features = hidden_forward(net, X, first);
  const ForwardState st = forward_train(net, first, features, selection, mode);
  return backward_from(net, st, Y, selection, loss);
}

TrainLog finetune(GopNetwork& net, const LabeledSet& train, const std::optional<LabeledSet>& val,
                  const TrainSpec& spec, const TrainableSelection& selection) {
  spec.validate();
  check_batch(net, train.X, train.Y);
  check_selection(net, selection);
  if (val) check_batch(net, val->X, val->Y);

  if (selection.include_norm) {
    std::set<std::size_t> layers;
    for (const auto& ref : selection.blocks) layers.insert(ref.layer);
    for (auto l : layers) init_batchnorm_from_standardization(net.layer(l));
  }

  const std::size_t first = first_trainable_layer(net, selection);
  const Matrix features = hidden_forward(net, train.X, first);
  const std::size_t n = train.size();

  // Frozen blocks of the first trainable layer see fixed inputs unless input
  // dropout is active, so their outputs are computed once.
  std::optional<Matrix> frozen_raw;
  if (first < net.num_layers() && spec.dropout_input == 0.0) {
    const GopLayer& layer = net.layer(first);
    frozen_raw = Matrix::Zero(features.rows(), static_cast<Eigen::Index>(layer.width()));
    for (std::size_t b = 0; b < layer.blocks.size(); ++b) {
      if (selection.blocks.count({first, b})) continue;
      const auto off = static_cast<Eigen::Index>(layer.block_offset(b));
      frozen_raw->middleCols(off, static_cast<Eigen::Index>(layer.blocks[b].width())) =
          block_forward(layer.blocks[b], features);
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  Rng rng(spec.seed);
  PassMode mode;
  mode.batch_norm_training = true;
  mode.dropout_input = spec.dropout_input;
  mode.dropout_hidden = spec.dropout_hidden;
  mode.bn_epsilon = spec.bn_epsilon;
  mode.rng = &rng;

  const double decay = spec.weight_reg.kind == WeightReg::Kind::Decay ? spec.weight_reg.value : 0.0;
  const bool max_norm = spec.weight_reg.kind == WeightReg::Kind::MaxNorm;
  const double momentum = spec.bn_momentum;

  TrainLog log;
  std::size_t epoch = 0;
  for (const auto& stage : spec.schedule) {
    const double lr = stage.learning_rate;
    for (std::size_t e = 0; e < stage.epochs; ++e, ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < n; start += spec.batch_size) {
        const std::size_t count = std::min(spec.batch_size, n - start);
        const std::span<const std::size_t> idx(order.data() + start, count);
        const Matrix xb = gather_rows(features, idx);
        const Matrix yb = gather_rows(train.Y, idx);
        Matrix frozen_b;
        if (frozen_raw) frozen_b = gather_rows(*frozen_raw, idx);
        const ForwardState st = forward_train(net, first, xb, selection, mode, frozen_raw ? &frozen_b : nullptr);
        Gradients g = backward_from(net, st, yb, selection, spec.loss);
        if (!std::isfinite(g.loss))
          throw NonFiniteLoss(epoch, "non-finite training loss in epoch " + std::to_string(epoch));
        loss_sum += g.loss * static_cast<double>(count);
        if (lr == 0.0) continue;

        for (auto& bg : g.blocks) {
          GopLayer& layer = net.layer(bg.ref.layer);
          NeuronBlock& block = layer.blocks[bg.ref.block];
          if (decay > 0.0) bg.d_weights += decay * block.weights;
          block.weights -= lr * bg.d_weights;
          block.bias -= lr * bg.d_bias;
          if (max_norm) project_max_norm(block.weights, spec.weight_reg.value);
          if (bg.d_scale.size() > 0) {
            const auto off = static_cast<Eigen::Index>(layer.block_offset(bg.ref.block));
            const auto bw = static_cast<Eigen::Index>(block.width());
            layer.norm.scale.segment(off, bw) -= lr * bg.d_scale;
            layer.norm.shift.segment(off, bw) -= lr * bg.d_shift;
          }
        }
        if (g.d_output_weights) {
          if (decay > 0.0) *g.d_output_weights += decay * net.output_weights();
          net.output_weights() -= lr * *g.d_output_weights;
          net.output_bias() -= lr * *g.d_output_bias;
        }
        // Running statistics of batch-normalized units.
        for (std::size_t li = 0; li < st.layers.size(); ++li) {
          const LayerCache& c = st.layers[li];
          NormState& norm = net.layer(first + li).norm;
          for (Eigen::Index j = 0; j < c.batch_mean.size(); ++j) {
            if (!c.batch_stat[static_cast<std::size_t>(j)]) continue;
            norm.mean[j] = momentum * norm.mean[j] + (1.0 - momentum) * c.batch_mean[j];
            const double var = momentum * norm.std[j] * norm.std[j] +
                               (1.0 - momentum) * (c.batch_var[j] + spec.bn_epsilon);
            norm.std[j] = std::max(std::sqrt(var), kStdFloor);
          }
        }
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.learning_rate = lr;
      rec.train_loss = loss_sum / static_cast<double>(n);
      if (val) {
        const Matrix out = network_forward(net, val->X);
        rec.val_loss = loss_value(out, val->Y, spec.loss);
        rec.val_accuracy = accuracy(out, val->Y);
      }
      log.epochs.push_back(rec);
    }
  }

  const Matrix train_out = network_forward(net, train.X);
  log.final_train_loss = loss_value(train_out, train.Y, spec.loss);
  log.final_train_accuracy = accuracy(train_out, train.Y);
  if (!std::isfinite(log.final_train_loss))
    throw NonFiniteLoss(epoch, "non-finite loss after training");
  if (val) {
    const Matrix out = network_forward(net, val->X);
    log.final_val_loss = loss_value(out, val->Y, spec.loss);
    log.final_val_accuracy = accuracy(out, val->Y);
  }
  return log;
}

}  // namespace gop
