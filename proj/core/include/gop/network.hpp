#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gop/operators.hpp"

namespace gop {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Lower bound applied to every stored standard deviation.
inline constexpr double kStdFloor = 1e-6;

/// A group of neurons sharing one operator set.
struct NeuronBlock {
  OperatorSet op_set;
  Matrix weights;  // fan_in x width
  Vector bias;     // width

  std::size_t fan_in() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(weights.cols()); }
};

enum class NormMode : std::uint8_t { Standardize, BatchNorm };

/// Per-unit normalization of a layer's concatenated block outputs.
///   Standardize: (h - mean) / std
///   BatchNorm (inference): scale * (h - mean) / std + shift
struct NormState {
  NormMode mode = NormMode::Standardize;
  Vector mean;
  Vector std;
  Vector scale;
  Vector shift;

  std::size_t size() const noexcept { return static_cast<std::size_t>(mean.size()); }
  bool is_fitted_for(std::size_t width) const noexcept;

  /// mean 0, std 1, scale 1, shift 0.
  static NormState identity(std::size_t width);
  /// Column statistics of `h` using the population standard deviation.
  static NormState fit(const Matrix& h);

  /// Appends the units of `other` (only its statistics; the mode is kept).
  void append(const NormState& other);
  Matrix apply(const Matrix& h) const;
};

struct GopLayer {
  std::vector<NeuronBlock> blocks;
  NormState norm;

  std::size_t width() const noexcept;
  std::size_t fan_in() const noexcept { return blocks.empty() ? 0 : blocks.front().fan_in(); }
  /// Column offset of block `b` inside the concatenated layer output.
  std::size_t block_offset(std::size_t b) const noexcept;
  std::size_t num_distinct_op_sets() const;
};

/// Ordered GOP hidden layers followed by an output map. The output map is
/// linear (H * W + b) unless `output_op_set` is set, in which case the output
/// units are themselves GOP neurons (used by the layerwise baselines).
class GopNetwork {
 public:
  GopNetwork(std::size_t input_dim, std::vector<GopLayer> hidden, Matrix output_weights,
             Vector output_bias, std::optional<OperatorSet> output_op_set = std::nullopt);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_outputs() const noexcept { return static_cast<std::size_t>(output_bias_.size()); }
  std::size_t num_layers() const noexcept { return hidden_.size(); }

  const std::vector<GopLayer>& layers() const noexcept { return hidden_; }
  std::vector<GopLayer>& layers() noexcept { return hidden_; }
  const GopLayer& layer(std::size_t l) const { return hidden_.at(l); }
  GopLayer& layer(std::size_t l) { return hidden_.at(l); }

  const Matrix& output_weights() const noexcept { return output_weights_; }
  Matrix& output_weights() noexcept { return output_weights_; }
  const Vector& output_bias() const noexcept { return output_bias_; }
  Vector& output_bias() noexcept { return output_bias_; }
  const std::optional<OperatorSet>& output_op_set() const noexcept { return output_op_set_; }

  /// Re-checks the full dimension chain; throws ConfigError / DimensionMismatch.
  void validate() const;

 private:
  std::size_t input_dim_;
  std::vector<GopLayer> hidden_;
  Matrix output_weights_;  // last_width x C
  Vector output_bias_;     // C
  std::optional<OperatorSet> output_op_set_;
};

/// Pre-normalization block activations, N x width.
Matrix block_forward(const NeuronBlock& block, const Matrix& inputs);
/// Same, also returning the pre-activation values x = pool(...) + b.
Matrix block_forward(const NeuronBlock& block, const Matrix& inputs, Matrix& pre_activation);

/// Concatenated block outputs before normalization.
Matrix layer_raw_forward(const GopLayer& layer, const Matrix& inputs);
/// Normalized layer output (inference mode).
Matrix layer_forward(const GopLayer& layer, const Matrix& inputs);

/// Output of hidden layer `upto - 1` (inputs when upto == 0).
Matrix hidden_forward(const GopNetwork& net, const Matrix& inputs, std::size_t upto);
/// Output of the last hidden layer.
Matrix hidden_forward(const GopNetwork& net, const Matrix& inputs);
/// Applies the output map to a last-hidden representation.
Matrix output_forward(const GopNetwork& net, const Matrix& hidden);
/// Full inference pass, N x C. No output activation for the linear map.
Matrix network_forward(const GopNetwork& net, const Matrix& inputs);

/// Row-wise argmax (first maximal index on ties).
std::vector<std::size_t> argmax_rows(const Matrix& m);
/// Mean over all N*C entries of the squared error.
double mse(const Matrix& predictions, const Matrix& targets);
/// Fraction of rows whose argmax agrees.
double accuracy(const Matrix& predictions, const Matrix& targets);

/// Synaptic weights and biases of hidden blocks plus the output map.
/// Normalization statistics and batch-norm scale/shift are not counted.
std::uint64_t count_params(const GopNetwork& net);
/// Per-sample inference FLOPs (see the cost table in operators.hpp).
/// Normalization costs 2 per hidden unit (folded affine transform).
std::uint64_t count_flops(const GopNetwork& net);
std::uint64_t block_flops(const NeuronBlock& block);

}  // namespace gop
