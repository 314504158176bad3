#pragma once

// Mini-batch SGD finetuning of selected parts of a GopNetwork.

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "gop/data.hpp"
#include "gop/network.hpp"
#include "gop/random.hpp"

namespace gop {

enum class LossKind { MSE, CrossEntropySoftmax };

struct WeightReg {
  enum class Kind { None, Decay, MaxNorm };
  Kind kind = Kind::MaxNorm;
  double value = 2.0;  // decay lambda or max-norm bound

  static WeightReg none() { return {Kind::None, 0.0}; }
  static WeightReg decay(double lambda) { return {Kind::Decay, lambda}; }
  static WeightReg max_norm(double m) { return {Kind::MaxNorm, m}; }
};

struct LrStage {
  double learning_rate;
  std::size_t epochs;
};

struct TrainSpec {
  std::vector<LrStage> schedule{{0.01, 20}, {0.001, 40}, {0.0001, 40}};
  std::size_t batch_size = 32;
  double dropout_hidden = 0.3;
  double dropout_input = 0.2;
  WeightReg weight_reg = WeightReg::max_norm(2.0);
  LossKind loss = LossKind::MSE;
  std::uint64_t seed = 0;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  /// Throws ConfigError. Learning rates must be >= 0 and non-increasing.
  void validate() const;
  std::size_t total_epochs() const noexcept;
};

struct BlockRef {
  std::size_t layer = 0;
  std::size_t block = 0;
  friend auto operator<=>(const BlockRef&, const BlockRef&) = default;
};

struct TrainableSelection {
  std::set<BlockRef> blocks;
  bool include_output = true;
  /// Batch-norm scale/shift (and running statistics) of the selected blocks.
  bool include_norm = true;

  static TrainableSelection everything(const GopNetwork& net);
  static TrainableSelection output_only();
};

struct BlockGradient {
  BlockRef ref;
  Matrix d_weights;
  Vector d_bias;
  Vector d_scale;  // empty unless the block's normalization is trainable
  Vector d_shift;
};

struct Gradients {
  double loss = 0.0;
  std::vector<BlockGradient> blocks;
  std::optional<Matrix> d_output_weights;
  std::optional<Vector> d_output_bias;

  const BlockGradient* find(BlockRef ref) const noexcept;
};

/// Forward-pass behaviour during training.
struct PassMode {
  /// Use batch statistics for the normalization of selected blocks that are in
  /// BatchNorm mode (with include_norm).
  bool batch_norm_training = true;
  double dropout_input = 0.0;
  double dropout_hidden = 0.0;
  double bn_epsilon = 1e-5;
  Rng* rng = nullptr;  // required when any dropout rate is non-zero
};

/// Loss on a batch, evaluated with the same forward pass `backward` uses.
double batch_loss(const GopNetwork& net, const Matrix& X, const Matrix& Y, const TrainableSelection& selection,
                  LossKind loss, const PassMode& mode = {});

/// Exact gradient of the batch loss with respect to every selected scalar.
Gradients backward(const GopNetwork& net, const Matrix& X, const Matrix& Y, const TrainableSelection& selection,
                   LossKind loss, const PassMode& mode = {});

double loss_value(const Matrix& outputs, const Matrix& targets, LossKind loss);

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // mean batch loss in training mode
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  double final_train_loss = 0.0;  // inference mode, full training split
  double final_train_accuracy = 0.0;
  std::optional<double> final_val_loss;
  std::optional<double> final_val_accuracy;
};

/// Mini-batch SGD over the schedule. Dropout is applied only while training.
/// The network is left in inference mode. Parameters outside `selection` are
/// not modified. Throws NonFiniteLoss naming the epoch.
TrainLog finetune(GopNetwork& net, const LabeledSet& train, const std::optional<LabeledSet>& val,
                  const TrainSpec& spec, const TrainableSelection& selection);

/// Switches a Standardize layer to BatchNorm with running statistics copied
/// from the standardization, scale 1 and shift 0. Idempotent.
void init_batchnorm_from_standardization(GopLayer& layer);

}  // namespace gop
