#include "gop/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "kernels.hpp"

namespace gop {

bool NormState::is_fitted_for(std::size_t width) const noexcept {
  const auto w = static_cast<Eigen::Index>(width);
  return mean.size() == w && std.size() == w && scale.size() == w && shift.size() == w;
}

NormState NormState::identity(std::size_t width) {
  const auto w = static_cast<Eigen::Index>(width);
  NormState s;
  s.mean = Vector::Zero(w);
  s.std = Vector::Ones(w);
  s.scale = Vector::Ones(w);
  s.shift = Vector::Zero(w);
  return s;
}

NormState NormState::fit(const Matrix& h) {
  if (h.rows() == 0) throw EmptyInput("NormState::fit: no samples");
  NormState s = identity(static_cast<std::size_t>(h.cols()));
  const double n = static_cast<double>(h.rows());
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    const double m = h.col(j).sum() / n;
    const double var = (h.col(j).array() - m).square().sum() / n;
    s.mean[j] = m;
    s.std[j] = std::max(std::sqrt(var), kStdFloor);
  }
  return s;
}

void NormState::append(const NormState& other) {
  auto cat = [](Vector& a, const Vector& b) {
    Vector out(a.size() + b.size());
    out << a, b;
    a = std::move(out);
  };
  cat(mean, other.mean);
  cat(std, other.std);
  cat(scale, other.scale);
  cat(shift, other.shift);
}

Matrix NormState::apply(const Matrix& h) const {
  if (!is_fitted_for(static_cast<std::size_t>(h.cols())))
    throw UnfitNormalization("normalization statistics not fitted for " + std::to_string(h.cols()) +
                             " units");
  Matrix out(h.rows(), h.cols());
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    if (mode == NormMode::Standardize) {
      out.col(j) = (h.col(j).array() - mean[j]) / std[j];
    } else {
      out.col(j) = scale[j] * ((h.col(j).array() - mean[j]) / std[j]) + shift[j];
    }
  }
  return out;
}

std::size_t GopLayer::width() const noexcept {
  std::size_t w = 0;
  for (const auto& b : blocks) w += b.width();
  return w;
}

std::size_t GopLayer::block_offset(std::size_t b) const noexcept {
  std::size_t off = 0;
  for (std::size_t i = 0; i < b && i < blocks.size(); ++i) off += blocks[i].width();
  return off;
}

std::size_t GopLayer::num_distinct_op_sets() const {
  std::set<std::size_t> ids;
  for (const auto& b : blocks) ids.insert(b.op_set.index());
  return ids.size();
}

GopNetwork::GopNetwork(std::size_t input_dim, std::vector<GopLayer> hidden, Matrix output_weights,
                       Vector output_bias, std::optional<OperatorSet> output_op_set)
    : input_dim_(input_dim),
      hidden_(std::move(hidden)),
      output_weights_(std::move(output_weights)),
      output_bias_(std::move(output_bias)),
      output_op_set_(output_op_set) {
  validate();
}

void GopNetwork::validate() const {
  if (input_dim_ == 0) throw ConfigError("network input dimension must be positive");
  if (hidden_.empty()) throw ConfigError("network must have at least one hidden layer");
  if (output_bias_.size() == 0) throw ConfigError("network must have at least one output");
  std::size_t fan_in = input_dim_;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    const auto& layer = hidden_[l];
    if (layer.blocks.empty())
      throw ConfigError("hidden layer " + std::to_string(l) + " has no neuron blocks");
    for (std::size_t b = 0; b < layer.blocks.size(); ++b) {
      const auto& block = layer.blocks[b];
      const std::string where = "layer " + std::to_string(l) + " block " + std::to_string(b);
      if (block.width() == 0) throw ConfigError(where + " has zero width");
      if (block.fan_in() != fan_in)
        throw DimensionMismatch(where + " fan_in " + std::to_string(block.fan_in()) + " != " +
                                std::to_string(fan_in));
      if (static_cast<std::size_t>(block.bias.size()) != block.width())
        throw DimensionMismatch(where + " bias length differs from width");
    }
    const std::size_t width = layer.width();
    if (layer.norm.size() != 0 && !layer.norm.is_fitted_for(width))
      throw DimensionMismatch("layer " + std::to_string(l) + " normalization size differs from width");
    fan_in = width;
  }
  if (static_cast<std::size_t>(output_weights_.rows()) != fan_in ||
      output_weights_.cols() != output_bias_.size())
    throw DimensionMismatch("output weights must be " + std::to_string(fan_in) + " x " +
                            std::to_string(output_bias_.size()));
}

Matrix block_forward(const NeuronBlock& block, const Matrix& inputs, Matrix& pre_activation) {
  if (static_cast<std::size_t>(inputs.cols()) != block.fan_in())
    throw DimensionMismatch("block_forward: expected " + std::to_string(block.fan_in()) +
                            " input columns, got " + std::to_string(inputs.cols()));
  const Matrix inputs_t = inputs.transpose();
  Matrix out;
  detail::block_forward_kernel(block, inputs_t, pre_activation, out);
  return out;
}

Matrix block_forward(const NeuronBlock& block, const Matrix& inputs) {
  Matrix pre;
  return block_forward(block, inputs, pre);
}

Matrix layer_raw_forward(const GopLayer& layer, const Matrix& inputs) {
  if (layer.blocks.empty()) throw ConfigError("layer has no blocks");
  if (static_cast<std::size_t>(inputs.cols()) != layer.fan_in())
    throw DimensionMismatch("layer_forward: expected " + std::to_string(layer.fan_in()) +
                            " input columns, got " + std::to_string(inputs.cols()));
  const Matrix inputs_t = inputs.transpose();
  Matrix h(inputs.rows(), static_cast<Eigen::Index>(layer.width()));
  Matrix pre, out;
  Eigen::Index off = 0;
  for (const auto& block : layer.blocks) {
    detail::block_forward_kernel(block, inputs_t, pre, out);
    h.middleCols(off, out.cols()) = out;
    off += out.cols();
  }
  return h;
}

Matrix layer_forward(const GopLayer& layer, const Matrix& inputs) {
  return layer.norm.apply(layer_raw_forward(layer, inputs));
}

Matrix hidden_forward(const GopNetwork& net, const Matrix& inputs, std::size_t upto) {
  if (static_cast<std::size_t>(inputs.cols()) != net.input_dim())
    throw DimensionMismatch("network expects " + std::to_string(net.input_dim()) +
                            " input features, got " + std::to_string(inputs.cols()));
  Matrix h = inputs;
  for (std::size_t l = 0; l < upto && l < net.num_layers(); ++l) h = layer_forward(net.layer(l), h);
  return h;
}

Matrix hidden_forward(const GopNetwork& net, const Matrix& inputs) {
  return hidden_forward(net, inputs, net.num_layers());
}

Matrix output_forward(const GopNetwork& net, const Matrix& hidden) {
  if (hidden.cols() != net.output_weights().rows())
    throw DimensionMismatch("output map expects " + std::to_string(net.output_weights().rows()) +
                            " hidden units");
  if (net.output_op_set()) {
    NeuronBlock out_block{*net.output_op_set(), net.output_weights(), net.output_bias()};
    return block_forward(out_block, hidden);
  }
  Matrix out = hidden * net.output_weights();
  out.rowwise() += net.output_bias().transpose();
  return out;
}

Matrix network_forward(const GopNetwork& net, const Matrix& inputs) {
  return output_forward(net, hidden_forward(net, inputs));
}

std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
      if (m(r, c) > m(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(best);
  }
  return out;
}

double mse(const Matrix& predictions, const Matrix& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
    throw DimensionMismatch("mse: prediction and target shapes differ");
  if (predictions.size() == 0) throw EmptyInput("mse: no samples");
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

double accuracy(const Matrix& predictions, const Matrix& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
    throw DimensionMismatch("accuracy: prediction and target shapes differ");
  if (predictions.rows() == 0) throw EmptyInput("accuracy: no samples");
  const auto p = argmax_rows(predictions);
  const auto t = argmax_rows(targets);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hits += p[i] == t[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

std::uint64_t count_params(const GopNetwork& net) {
  std::uint64_t total = 0;
  for (const auto& layer : net.layers())
    for (const auto& b : layer.blocks) total += b.fan_in() * b.width() + b.width();
  total += static_cast<std::uint64_t>(net.output_weights().size() + net.output_bias().size());
  return total;
}

std::uint64_t block_flops(const NeuronBlock& block) {
  const std::uint64_t per_neuron = block.fan_in() * nodal_flops(block.op_set.nodal) +
                                   pool_flops(block.op_set.pool, block.fan_in()) + 1 +
                                   activation_flops(block.op_set.activation);
  return per_neuron * block.width();
}

std::uint64_t count_flops(const GopNetwork& net) {
  std::uint64_t total = 0;
  for (const auto& layer : net.layers()) {
    for (const auto& b : layer.blocks) total += block_flops(b);
    total += 2 * layer.width();
  }
  const auto last = static_cast<std::uint64_t>(net.output_weights().rows());
  const std::uint64_t outputs = net.num_outputs();
  if (net.output_op_set()) {
    NeuronBlock out_block{*net.output_op_set(), net.output_weights(), net.output_bias()};
    total += block_flops(out_block);
  } else {
    // last mults, last - 1 adds and one bias add per output.
    total += outputs * 2 * last;
  }
  return total;
}

}  // namespace gop
