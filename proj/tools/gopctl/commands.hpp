#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gop/dataset.hpp"
#include "gop/progression.hpp"
#include "run_config.hpp"

namespace gopctl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct PreparedData {
  gop::Dataset dataset;
  gop::FeatureScaling scaling;
  gop::TrainingData data;
};

/// Loads the CSV, splits it with the run's split seed and fits the feature
/// scaling on the training rows.
PreparedData prepare_data(const RunConfig& config);

struct TrainResult {
  gop::GopNetwork network;
  gop::ProgressionReport report;
};

/// Trains one seed and writes config.json, model.json, report.json,
/// trainlog.csv, operators.csv, steps.csv and timing.json into `dir`.
TrainResult train_to_directory(const RunConfig& config, const std::filesystem::path& dir);

/// Model document with the input scaling and class names attached.
nlohmann::json model_document(const gop::GopNetwork& net, const gop::FeatureScaling& scaling,
                              const std::vector<std::string>& class_names);

}  // namespace gopctl
