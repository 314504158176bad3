#include <gtest/gtest.h>

#include <cstring>
#include <limits>

#include "gop/baselines.hpp"
#include "gop/errors.hpp"
#include "gop/synthetic.hpp"

using namespace gop;

namespace {

TrainingData blobs(std::uint64_t seed, std::size_t n = 90) {
  Dataset ds = make_gaussian_blobs(n, 3, 4, 3.0, 0.5, seed);
  ds.split = split_dataset(ds, {}, seed);
  return to_training_data(ds, fit_train_scaling(ds));
}

LayerwiseConfig tiny(std::vector<std::size_t> widths, double target) {
  LayerwiseConfig cfg;
  cfg.template_widths = std::move(widths);
  cfg.target_mse = target;
  cfg.epochs_per_candidate = 1;
  cfg.train_spec.schedule = {{0.01, 2}};
  cfg.train_spec.batch_size = 64;
  return cfg;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST(Pop, InfiniteTargetTrainsFourTimesTheLibrary) {
  const auto data = blobs(1);
  const auto [net, report] = run_pop_baseline(data, tiny({3, 3}, std::numeric_limits<double>::infinity()));
  EXPECT_EQ(net.num_layers(), 1u);
  EXPECT_FALSE(report.template_exhausted);
  ASSERT_EQ(report.candidate_trainings.size(), 4 * kNumOperatorSets);
  EXPECT_TRUE(report.steps.empty());
  std::size_t per_phase[2][2] = {{0, 0}, {0, 0}};
  for (const auto& t : report.candidate_trainings) {
    ASSERT_TRUE(t.pass == 1 || t.pass == 2);
    ++per_phase[t.pass - 1][t.phase == "hidden"];
    EXPECT_EQ(t.layer_index, 0u);
  }
  for (auto& pass : per_phase)
    for (std::size_t n : pass) EXPECT_EQ(n, kNumOperatorSets);
  // The layer keeps one operator set and the output units carry the chosen one.
  EXPECT_EQ(net.layer(0).num_distinct_op_sets(), 1u);
  ASSERT_TRUE(net.output_op_set().has_value());
  EXPECT_EQ(report.params, count_params(net));
}

TEST(Pop, UnreachableTargetExhaustsTemplate) {
  const auto data = blobs(2);
  auto cfg = tiny({2, 2}, 0.0);
  cfg.library = std::vector<OperatorSet>{kPerceptronSet, OperatorSet{NodalOp::Quadratic, PoolOp::Summation, ActivationOp::Tanh}};
  const auto [net, report] = run_pop_baseline(data, cfg);
  EXPECT_TRUE(report.template_exhausted);
  EXPECT_EQ(net.num_layers(), 2u);
  EXPECT_EQ(report.candidate_trainings.size(), 2u * 4u * 2u);
}

TEST(Pop, SingleSetLibraryIsAFixedNetwork) {
  const auto data = blobs(3);
  const OperatorSet only{NodalOp::Harmonic, PoolOp::Maximum, ActivationOp::ReLU};
  auto cfg = tiny({4}, 1.0);
  cfg.library = std::vector<OperatorSet>{only};
  const auto [net, report] = run_pop_baseline(data, cfg);
  EXPECT_EQ(report.candidate_trainings.size(), 4u);
  EXPECT_EQ(net.layer(0).blocks.front().op_set, only);
  EXPECT_EQ(*net.output_op_set(), only);
}

TEST(Pmlp, MatchesPopOnThePerceptronLibrary) {
  const auto data = blobs(4);
  auto cfg = tiny({5, 4}, 0.0);
  cfg.seed = 17;
  const auto [pmlp, pmlp_report] = run_pmlp_baseline(data, cfg);
  cfg.library = std::vector<OperatorSet>{kPerceptronSet};
  const auto [pop, pop_report] = run_pop_baseline(data, cfg);

  EXPECT_TRUE(pmlp_report.candidate_trainings.empty());
  EXPECT_TRUE(pmlp_report.steps.empty());
  EXPECT_EQ(pmlp_report.algorithm, "pmlp");
  ASSERT_EQ(pmlp.num_layers(), pop.num_layers());
  for (std::size_t l = 0; l < pmlp.num_layers(); ++l) {
    EXPECT_EQ(pmlp.layer(l).blocks.front().op_set, kPerceptronSet);
    EXPECT_TRUE(same_bits(pmlp.layer(l).blocks.front().weights, pop.layer(l).blocks.front().weights));
  }
  EXPECT_TRUE(same_bits(network_forward(pmlp, data.test->X), network_forward(pop, data.test->X)));
  EXPECT_EQ(pmlp_report.template_exhausted, pop_report.template_exhausted);
}

TEST(Pmlp, SeparableBlobsReachTargetInOneLayer) {
  const auto data = blobs(5, 300);
  LayerwiseConfig cfg;
  cfg.template_widths = {16, 16, 16};
  cfg.target_mse = 0.05;
  // Sigmoid output units under MSE learn slowly with small steps.
  cfg.epochs_per_candidate = 200;
  cfg.train_spec.dropout_hidden = 0.0;
  cfg.train_spec.dropout_input = 0.0;
  cfg.train_spec.schedule = {{0.5, 5}};
  const auto [net, report] = run_pmlp_baseline(data, cfg);
  EXPECT_EQ(net.num_layers(), 1u);
  EXPECT_FALSE(report.template_exhausted);
  EXPECT_GE(report.final_metrics.test->accuracy, 0.99);
}

TEST(Layerwise, ConfigValidation) {
  LayerwiseConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.template_widths = {};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.template_widths = {4, 0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.epochs_per_candidate = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.target_mse = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
