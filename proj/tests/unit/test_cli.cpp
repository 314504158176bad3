#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "gop/model_io.hpp"
#include "gop/synthetic.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "gopctl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = gopctl::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("gopctl_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    data_ = dir_ / "moons.csv";
    std::ofstream(data_) << gop::to_csv(gop::make_two_moons(160, 0.2, 3));
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Small widths and few epochs keep each training run well under a second.
  std::vector<std::string> fast_train(const fs::path& out) const {
    return {"train",
            "--data", data_.string(),
            "--out", out.string(),
            "--set", "progression.n_min=4",
            "--set", "progression.n_i=4",
            "--set", "progression.max_layer_width=12",
            "--set", "progression.max_layers=2",
            "--set", R"(train.schedule=[{"learning_rate":0.01,"epochs":3}])"};
  }

  fs::path dir_;
  fs::path data_;
};

}  // namespace

TEST_F(Cli, TrainWritesLoadableArtifacts) {
  const auto out = dir_ / "run";
  const auto r = run(fast_train(out));
  ASSERT_EQ(r.code, gopctl::kExitOk) << r.err;
  for (const char* f : {"config.json", "model.json", "report.json", "trainlog.csv", "operators.csv", "steps.csv",
                        "timing.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const gop::GopNetwork net = gop::load_model(out / "model.json");
  EXPECT_EQ(net.input_dim(), 2u);
  EXPECT_EQ(net.num_outputs(), 2u);
  const json report = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["algorithm"], "hemlgop");
  EXPECT_EQ(report["params"].get<std::uint64_t>(), gop::count_params(net));

  // The persisted config re-runs the same experiment.
  const json cfg = json::parse(slurp(out / "config.json"));
  EXPECT_EQ(cfg["progression"]["n_min"], 4);
  EXPECT_EQ(cfg["dataset"]["path"], fs::absolute(data_).lexically_normal().string());

  const auto flops = run({"flops", "--model", (out / "model.json").string()});
  ASSERT_EQ(flops.code, 0);
  EXPECT_EQ(std::stoull(flops.out), gop::count_flops(net));
  const auto params = run({"params", "--model", (out / "model.json").string()});
  EXPECT_EQ(std::stoull(params.out), gop::count_params(net));
}

TEST_F(Cli, EvalReproducesTestMetrics) {
  const auto out = dir_ / "run";
  ASSERT_EQ(run(fast_train(out)).code, 0);
  const auto r = run({"eval", "--model", (out / "model.json").string(), "--config", (out / "config.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json got = json::parse(r.out);
  const json report = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(got["split"], "test");
  EXPECT_EQ(got["samples"], 32);
  EXPECT_EQ(got["accuracy"].get<double>(), report["final_metrics"]["test"]["accuracy"].get<double>());
  EXPECT_EQ(got["loss"].get<double>(), report["final_metrics"]["test"]["loss"].get<double>());

  const auto all = run({"eval", "--model", (out / "model.json").string(), "--data", data_.string()});
  ASSERT_EQ(all.code, 0) << all.err;
  EXPECT_EQ(json::parse(all.out)["samples"], 160);
}

TEST_F(Cli, EvalRejectsWrongFeatureCount) {
  const auto out = dir_ / "run";
  ASSERT_EQ(run(fast_train(out)).code, 0);
  const auto wide = dir_ / "wide.csv";
  std::ofstream(wide) << gop::to_csv(gop::make_gaussian_blobs(30, 2, 3, 3.0, 0.5, 0));
  const auto r = run({"eval", "--model", (out / "model.json").string(), "--data", wide.string()});
  EXPECT_EQ(r.code, gopctl::kExitRuntime);
  EXPECT_NE(r.err.find("features"), std::string::npos);
}

TEST_F(Cli, MissingDatasetIsAConfigError) {
  const auto r = run({"train", "--data", (dir_ / "nope.csv").string(), "--out", (dir_ / "x").string()});
  EXPECT_EQ(r.code, gopctl::kExitConfig);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "x" / "model.json"));
}

TEST_F(Cli, ConfigErrors) {
  auto args = fast_train(dir_ / "run");
  args.push_back("--set");
  args.push_back("progression.bogus=1");
  auto r = run(args);
  EXPECT_EQ(r.code, gopctl::kExitConfig);
  EXPECT_NE(r.err.find("progression.bogus"), std::string::npos);

  r = run({"train", "--data", data_.string(), "--variant", "resnet"});
  EXPECT_EQ(r.code, gopctl::kExitConfig);
  r = run({"train", "--data", data_.string(), "--set", "dataset.split.train=0.9"});
  EXPECT_EQ(r.code, gopctl::kExitConfig);
  r = run({"frobnicate"});
  EXPECT_EQ(r.code, gopctl::kExitConfig);
  r = run({"eval"});
  EXPECT_EQ(r.code, gopctl::kExitConfig);
  r = run({"train", "--data", data_.string(), "--set", "dataset.label_column=\"target\"", "--out",
           (dir_ / "y").string()});
  EXPECT_EQ(r.code, gopctl::kExitConfig);
}

TEST_F(Cli, SetOverridesReachTheRun) {
  const auto out = dir_ / "run";
  auto args = fast_train(out);
  args.insert(args.end(), {"--set", "progression.eps_n=inf", "--set", "progression.max_layers=1", "--variant", "hemlrn"});
  ASSERT_EQ(run(args).code, 0);
  const gop::GopNetwork net = gop::load_model(out / "model.json");
  ASSERT_EQ(net.num_layers(), 1u);
  EXPECT_EQ(net.layer(0).blocks.size(), 1u);
  EXPECT_EQ(net.layer(0).width(), 4u);
  EXPECT_EQ(json::parse(slurp(out / "report.json"))["algorithm"], "hemlrn");
}

TEST_F(Cli, LayerwiseBaselineDispatch) {
  const auto out = dir_ / "pop";
  const auto r = run({"train", "--data", data_.string(), "--out", out.string(), "--variant", "pop", "--template", "3,3",
                      "--target-mse", "inf", "--set", "baseline.epochs_per_candidate=1", "--set",
                      R"(train.schedule=[{"learning_rate":0.01,"epochs":1}])"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["algorithm"], "pop");
  EXPECT_EQ(report["candidate_trainings"].size(), 4 * gop::kNumOperatorSets);
  const json cfg = json::parse(slurp(out / "config.json"));
  EXPECT_EQ(cfg["baseline"]["template"], json::array({3, 3}));
}

TEST_F(Cli, MultiSeedSummary) {
  auto args = fast_train(dir_ / "multi");
  args.insert(args.end(), {"--seeds", "1,2"});
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json::parse(slurp(dir_ / "multi" / "summary.json"));
  EXPECT_EQ(summary["runs"].size(), 2u);
  EXPECT_TRUE(summary["median"].contains("test_accuracy"));
  EXPECT_TRUE(fs::exists(dir_ / "multi" / "seed_2" / "model.json"));
  EXPECT_EQ(json::parse(slurp(dir_ / "multi" / "seed_1" / "config.json"))["seed"], 1);
}

TEST_F(Cli, ReportCommand) {
  const auto out = dir_ / "run";
  ASSERT_EQ(run(fast_train(out)).code, 0);
  const auto md = run({"report", (out / "report.json").string(), "--out", (dir_ / "tables").string()});
  ASSERT_EQ(md.code, 0) << md.err;
  EXPECT_NE(md.out.find("| category | operator | count |"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "tables" / "operators.md"));
  EXPECT_TRUE(fs::exists(dir_ / "tables" / "steps.md"));
  const auto csv = run({"report", (out / "report.json").string(), "--format", "csv"});
  EXPECT_EQ(csv.out.rfind("category,operator,count\n", 0), 0u);
  EXPECT_EQ(run({"report", (dir_ / "missing.json").string()}).code, gopctl::kExitConfig);
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
  ASSERT_EQ(run(fast_train(dir_ / "a")).code, 0);
  ASSERT_EQ(run(fast_train(dir_ / "b")).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "model.json"), slurp(dir_ / "b" / "model.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "b" / "report.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "trainlog.csv"), slurp(dir_ / "b" / "trainlog.csv"));
}

TEST(RunConfig, JsonRoundTripAndOverrides) {
  gopctl::RunConfig cfg;
  cfg.dataset.path = "/data/x.csv";
  cfg.progression.eps_n = std::numeric_limits<double>::infinity();
  cfg.progression.train_spec.weight_reg = gop::WeightReg::decay(1e-4);
  cfg.algorithm = gopctl::Algorithm::HoMLRN;
  const json doc = gopctl::to_json(cfg);
  EXPECT_EQ(doc["progression"]["eps_n"], "inf");
  EXPECT_EQ(gopctl::to_json(gopctl::run_config_from_json(doc)), doc);

  json d = doc;
  gopctl::apply_override(d, "train.batch_size=8");
  gopctl::apply_override(d, "variant=pmlp");
  const auto back = gopctl::run_config_from_json(d);
  EXPECT_EQ(back.progression.train_spec.batch_size, 8u);
  EXPECT_EQ(back.algorithm, gopctl::Algorithm::PMLP);
  EXPECT_THROW(gopctl::apply_override(d, "no_equals_sign"), gop::ConfigError);
  d["train"]["batch_size"] = "eight";
  EXPECT_THROW(gopctl::run_config_from_json(d), gop::ConfigError);
}

#ifdef GOPCTL_BINARY
TEST(CliBinary, ExitCodes) {
  const std::string bin = GOPCTL_BINARY;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status(bin + " --help"), 0);
  EXPECT_EQ(status(bin + " train --data /nonexistent/file.csv --out /tmp/gopctl_exit_codes"), 2);
  EXPECT_EQ(status(bin + " params --model /nonexistent/model.json"), 2);
  const auto bad = fs::temp_directory_path() / "gopctl_bad_model.json";
  std::ofstream(bad) << R"({"version": 1, "input_dim": 2})";
  EXPECT_EQ(status(bin + " params --model " + bad.string()), 3);
  fs::remove(bad);
}
#endif
