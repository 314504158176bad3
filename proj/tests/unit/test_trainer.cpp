#include <gtest/gtest.h>

#include <cmath>

#include "checks.hpp"
#include "gop/ridge.hpp"
#include "gop/trainer.hpp"
#include "test_util.hpp"

using namespace gop;
using testutil::random_matrix;

namespace {

Matrix random_one_hot(Rng& rng, Eigen::Index n, Eigen::Index classes) {
  Matrix Y = Matrix::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) Y(i, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(classes)))) = 1.0;
  return Y;
}

TrainSpec quiet_spec(double lr, std::size_t epochs) {
  TrainSpec s;
  s.schedule = {{lr, epochs}};
  s.dropout_hidden = 0.0;
  s.dropout_input = 0.0;
  s.weight_reg = WeightReg::none();
  return s;
}

std::vector<double> all_values(const GopNetwork& net) {
  std::vector<double> v;
  auto add = [&](const auto& m) { v.insert(v.end(), m.data(), m.data() + m.size()); };
  for (const auto& layer : net.layers()) {
    for (const auto& b : layer.blocks) {
      add(b.weights);
      add(b.bias);
    }
    add(layer.norm.mean);
    add(layer.norm.std);
    add(layer.norm.scale);
    add(layer.norm.shift);
  }
  add(net.output_weights());
  add(net.output_bias());
  return v;
}

}  // namespace

TEST(TrainSpec, Validation) {
  TrainSpec s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.total_epochs(), 100u);
  s.schedule = {{0.001, 5}, {0.01, 5}};
  EXPECT_THROW(s.validate(), ConfigError);
  s = TrainSpec{};
  s.schedule = {{0.01, 0}};
  EXPECT_THROW(s.validate(), ConfigError);
  s = TrainSpec{};
  s.dropout_hidden = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = TrainSpec{};
  s.batch_size = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = TrainSpec{};
  s.schedule.clear();
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Backward, ZeroPredictionsGiveZeroOutputBiasGradient) {
  Rng rng(40);
  const Matrix X = random_matrix(rng, 8, 3);
  GopNetwork net = testutil::random_network(rng, {{kPerceptronSet}}, {{4}}, 3, 2, X);
  net.output_weights().setZero();
  net.output_bias().setZero();
  const Gradients g = backward(net, X, Matrix::Zero(8, 2), TrainableSelection::everything(net), LossKind::MSE);
  ASSERT_TRUE(g.d_output_bias.has_value());
  EXPECT_EQ(g.d_output_bias->cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.loss, 0.0);
}

TEST(Backward, SinglePerceptronHandChainRule) {
  const double x = 0.7, w = -1.3, b = 0.4, v = 2.1, c = -0.2, t = 1.0;
  GopLayer layer;
  layer.blocks.push_back({kPerceptronSet, Matrix::Constant(1, 1, w), Vector::Constant(1, b)});
  layer.norm = NormState::identity(1);
  const GopNetwork net(1, {layer}, Matrix::Constant(1, 1, v), Vector::Constant(1, c));
  TrainableSelection sel = TrainableSelection::everything(net);
  sel.include_norm = false;
  const Gradients g = backward(net, Matrix::Constant(1, 1, x), Matrix::Constant(1, 1, t), sel, LossKind::MSE);

  const double s = 1.0 / (1.0 + std::exp(-(w * x + b)));
  const double yhat = v * s + c;
  const double dy = 2.0 * (yhat - t);
  EXPECT_NEAR(g.loss, (yhat - t) * (yhat - t), 1e-15);
  EXPECT_NEAR((*g.d_output_bias)[0], dy, 1e-14);
  EXPECT_NEAR((*g.d_output_weights)(0, 0), dy * s, 1e-14);
  EXPECT_NEAR(g.blocks[0].d_bias[0], dy * v * s * (1 - s), 1e-14);
  EXPECT_NEAR(g.blocks[0].d_weights(0, 0), dy * v * s * (1 - s) * x, 1e-14);
}

TEST(Backward, GaussianCorrelationTanhBlockMatchesFiniteDifferences) {
  Rng rng(41);
  const Matrix X = random_matrix(rng, 12, 5);
  const Matrix Y = random_one_hot(rng, 12, 3);
  const OperatorSet op{NodalOp::Gaussian, PoolOp::Correlation1, ActivationOp::Tanh};
  const GopNetwork net = testutil::random_network(rng, {{op}}, {{4}}, 5, 3, X);
  TrainableSelection sel = TrainableSelection::everything(net);
  sel.include_norm = false;
  const auto n = static_cast<std::size_t>(count_params(net));
  const auto c = checks::network_gradient_check(net, X, Y, sel, LossKind::MSE, n, 1);
  EXPECT_EQ(c.failures, 0u) << "worst " << c.worst;
  EXPECT_GE(c.checked, n * 9 / 10);
}

TEST(Backward, EveryOperatorSetMatchesFiniteDifferences) {
  Rng rng(42);
  const Matrix X = random_matrix(rng, 8, 4);
  const Matrix Y = random_one_hot(rng, 8, 2);
  for (const OperatorSet& op : enumerate_operator_sets()) {
    const GopNetwork net = testutil::random_network(rng, {{op}}, {{3}}, 4, 2, X);
    TrainableSelection sel = TrainableSelection::everything(net);
    sel.include_norm = false;
    const auto c = checks::network_gradient_check(net, X, Y, sel, LossKind::MSE, 10, op.index());
    EXPECT_EQ(c.failures, 0u) << to_string(op) << " worst " << c.worst;
    EXPECT_EQ(c.checked, 10u) << to_string(op);
  }
}

TEST(Backward, DeepHeterogeneousNetworkWithBatchNorm) {
  Rng rng(43);
  const Matrix X = random_matrix(rng, 10, 3);
  const Matrix Y = random_one_hot(rng, 10, 2);
  GopNetwork net = testutil::random_network(
      rng, {{OperatorSet::from_index(2), OperatorSet::from_index(91)}, {OperatorSet::from_index(55)}}, {{3, 2}, {4}},
      3, 2, X);
  for (auto& layer : net.layers()) init_batchnorm_from_standardization(layer);
  net.layer(0).norm.scale = testutil::random_vector(rng, 5, 0.5, 1.5);
  net.layer(1).norm.shift = testutil::random_vector(rng, 4);
  const TrainableSelection sel = TrainableSelection::everything(net);
  for (LossKind loss : {LossKind::MSE, LossKind::CrossEntropySoftmax}) {
    const auto c = checks::network_gradient_check(net, X, Y, sel, loss, 40, 5);
    EXPECT_EQ(c.failures, 0u) << "worst " << c.worst;
    EXPECT_GE(c.checked, 36u);
  }
}

TEST(Backward, PartialSelectionOnlyReportsSelected) {
  Rng rng(44);
  const Matrix X = random_matrix(rng, 10, 3);
  const GopNetwork net = testutil::random_network(
      rng, {{OperatorSet::from_index(10), OperatorSet::from_index(30)}, {OperatorSet::from_index(12)}}, {{3, 2}, {4}},
      3, 2, X);
  TrainableSelection sel;
  sel.blocks = {{0, 1}};
  sel.include_output = false;
  sel.include_norm = false;
  const Gradients g = backward(net, X, random_one_hot(rng, 10, 2), sel, LossKind::MSE);
  ASSERT_EQ(g.blocks.size(), 1u);
  EXPECT_EQ(g.blocks[0].ref, (BlockRef{0, 1}));
  EXPECT_FALSE(g.d_output_weights.has_value());
  EXPECT_EQ(g.find({0, 0}), nullptr);
  const auto c = checks::network_gradient_check(net, X, random_one_hot(rng, 10, 2), sel, LossKind::MSE, 8, 3);
  EXPECT_EQ(c.failures, 0u);

  sel.blocks = {{3, 0}};
  EXPECT_THROW(backward(net, X, random_one_hot(rng, 10, 2), sel, LossKind::MSE), Error);
}

TEST(Finetune, ZeroLearningRateChangesNothing) {
  Rng rng(45);
  const Matrix X = random_matrix(rng, 40, 3);
  const LabeledSet train{X, random_one_hot(rng, 40, 2)};
  GopNetwork net = testutil::random_network(rng, {{OperatorSet::from_index(77)}}, {{5}}, 3, 2, X);
  init_batchnorm_from_standardization(net.layer(0));
  const auto before = all_values(net);
  TrainSpec spec;
  spec.schedule = {{0.0, 3}};
  finetune(net, train, std::nullopt, spec, TrainableSelection::everything(net));
  EXPECT_EQ(all_values(net), before);
}

TEST(Finetune, ConvexOutputProblemReachesLeastSquaresOptimum) {
  Rng rng(46);
  const Matrix X = random_matrix(rng, 200, 3);
  const LabeledSet train{X, random_one_hot(rng, 200, 2)};
  GopNetwork net = testutil::random_network(rng, {{kPerceptronSet}}, {{6}}, 3, 2, X);
  const Matrix H = hidden_forward(net, X);
  CandidateOptions opt;
  opt.c_grid = {0.0};
  const double optimum = evaluate_candidate(H, train.Y, opt).loss;

  const TrainSpec spec = quiet_spec(0.05, 300);
  const TrainLog log = finetune(net, train, std::nullopt, spec, TrainableSelection::output_only());
  EXPECT_LT(std::abs(log.final_train_loss - optimum), 1e-3);
  EXPECT_GE(log.final_train_loss, optimum - 1e-12);
}

TEST(Finetune, DeterministicAndFrozenPartsUntouched) {
  Rng rng(47);
  const Matrix X = random_matrix(rng, 60, 3);
  const LabeledSet train{X, random_one_hot(rng, 60, 2)};
  const LabeledSet val{random_matrix(rng, 20, 3), random_one_hot(rng, 20, 2)};
  const GopNetwork start = testutil::random_network(
      rng, {{OperatorSet::from_index(3), OperatorSet::from_index(50)}, {OperatorSet::from_index(8)}}, {{4, 3}, {5}}, 3,
      2, X);
  TrainableSelection sel;
  sel.blocks = {{1, 0}};
  TrainSpec spec;
  spec.schedule = {{0.01, 3}, {0.001, 2}};
  spec.seed = 9;

  GopNetwork a = start, b = start;
  const TrainLog la = finetune(a, train, val, spec, sel);
  const TrainLog lb = finetune(b, train, val, spec, sel);
  EXPECT_EQ(all_values(a), all_values(b));
  ASSERT_EQ(la.epochs.size(), 5u);
  for (std::size_t e = 0; e < la.epochs.size(); ++e) {
    EXPECT_EQ(la.epochs[e].train_loss, lb.epochs[e].train_loss);
    EXPECT_EQ(la.epochs[e].val_loss, lb.epochs[e].val_loss);
  }
  EXPECT_EQ(la.epochs[3].learning_rate, 0.001);

  for (std::size_t blk = 0; blk < 2; ++blk) {
    EXPECT_EQ(a.layer(0).blocks[blk].weights, start.layer(0).blocks[blk].weights);
    EXPECT_EQ(a.layer(0).blocks[blk].bias, start.layer(0).blocks[blk].bias);
  }
  EXPECT_EQ(a.layer(0).norm.mean, start.layer(0).norm.mean);
  EXPECT_EQ(a.layer(0).norm.mode, NormMode::Standardize);
  EXPECT_NE(a.layer(1).blocks[0].weights, start.layer(1).blocks[0].weights);
  EXPECT_EQ(a.layer(1).norm.mode, NormMode::BatchNorm);
  EXPECT_EQ(network_forward(a, X), network_forward(a, X));
}

TEST(Finetune, MaxNormBoundsHiddenColumns) {
  Rng rng(48);
  const Matrix X = random_matrix(rng, 80, 4, -3, 3);
  const LabeledSet train{X, random_one_hot(rng, 80, 3)};
  GopNetwork net = testutil::random_network(rng, {{kPerceptronSet, OperatorSet::from_index(20)}}, {{6, 4}}, 4, 3, X);
  TrainSpec spec = quiet_spec(0.5, 5);
  spec.weight_reg = WeightReg::max_norm(0.5);
  finetune(net, train, std::nullopt, spec, TrainableSelection::everything(net));
  for (const auto& b : net.layer(0).blocks)
    for (Eigen::Index i = 0; i < b.weights.cols(); ++i) EXPECT_LE(b.weights.col(i).norm(), 0.5 + 1e-9);
}

TEST(Finetune, WeightDecayShrinksWeights) {
  Rng rng(49);
  const Matrix X = random_matrix(rng, 30, 3);
  const LabeledSet train{X, Matrix::Zero(30, 2)};
  GopNetwork net = testutil::random_network(rng, {{kPerceptronSet}}, {{4}}, 3, 2, X);
  const double before = net.layer(0).blocks[0].weights.norm();
  TrainSpec spec = quiet_spec(0.1, 5);
  spec.weight_reg = WeightReg::decay(0.5);
  TrainableSelection sel;
  sel.blocks = {{0, 0}};
  sel.include_output = false;
  sel.include_norm = false;
  // Zero output weights make the data gradient vanish, leaving only the decay.
  net.output_weights().setZero();
  net.output_bias().setZero();
  finetune(net, train, std::nullopt, spec, sel);
  EXPECT_LT(net.layer(0).blocks[0].weights.norm(), before * 0.9);
}

TEST(Finetune, DivergenceReportsEpoch) {
  Rng rng(50);
  const Matrix X = random_matrix(rng, 40, 3, -3, 3);
  const LabeledSet train{X, random_one_hot(rng, 40, 2)};
  GopNetwork net = testutil::random_network(rng, {{OperatorSet::from_index(1 * 24 + 2)}}, {{4}}, 3, 2, X);
  try {
    finetune(net, train, std::nullopt, quiet_spec(1e12, 50), TrainableSelection::everything(net));
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_LT(e.epoch(), 50u);
  }
}

TEST(BatchNormInit, ConversionPreservesOutputs) {
  Rng rng(51);
  const Matrix X = random_matrix(rng, 100, 4);
  GopNetwork net = testutil::random_network(rng, {{OperatorSet::from_index(99), kPerceptronSet}}, {{3, 3}}, 4, 2, X);
  GopLayer& layer = net.layer(0);
  const Matrix before = layer_forward(layer, X);
  init_batchnorm_from_standardization(layer);
  EXPECT_EQ(layer.norm.mode, NormMode::BatchNorm);
  EXPECT_EQ(layer.norm.scale, Vector::Ones(6));
  EXPECT_EQ(layer.norm.shift, Vector::Zero(6));
  EXPECT_LT((layer_forward(layer, X) - before).cwiseAbs().maxCoeff(), 1e-12);
  const NormState once = layer.norm;
  init_batchnorm_from_standardization(layer);
  EXPECT_EQ(layer.norm.mean, once.mean);
  EXPECT_EQ(layer.norm.scale, once.scale);

  GopLayer unfit;
  unfit.blocks.push_back(testutil::random_block(rng, kPerceptronSet, 4, 2));
  EXPECT_THROW(init_batchnorm_from_standardization(unfit), UnfitNormalization);
}
