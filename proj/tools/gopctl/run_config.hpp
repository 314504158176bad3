#pragma once

// Everything needed to re-execute a training run, as one JSON document.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gop/baselines.hpp"
#include "gop/dataset.hpp"
#include "gop/progression.hpp"

namespace gopctl {

enum class Algorithm { HeMLGOP, HoMLGOP, HeMLRN, HoMLRN, POP, PMLP };

std::string to_token(Algorithm a);
/// Throws gop::ConfigError for unknown tokens.
Algorithm parse_algorithm(const std::string& token);
bool is_layerwise(Algorithm a) noexcept;

struct DatasetConfig {
  std::string path;
  gop::CsvOptions csv;
  bool standardize_features = true;
  gop::SplitFractions split;
  bool stratified = true;
};

struct RunConfig {
  DatasetConfig dataset;
  Algorithm algorithm = Algorithm::HeMLGOP;
  std::uint64_t seed = 0;
  std::string out = "run";
  /// Progression settings; its seed and library fields are not used.
  gop::ProgressionConfig progression;
  /// Template, target and epochs of the POP / PMLP baselines.
  std::vector<std::size_t> template_widths{200, 200, 200};
  double target_mse = 1e-3;
  std::size_t epochs_per_candidate = 20;

  /// Throws gop::ConfigError.
  void validate() const;

  gop::ProgressionConfig progression_config() const;
  gop::LayerwiseConfig layerwise_config() const;
  std::uint64_t split_seed() const noexcept;
};

/// Complete document with every field spelled out.
nlohmann::json to_json(const RunConfig& config);

/// Fields absent from `doc` keep their defaults. Unknown keys and values of the
/// wrong type throw gop::ConfigError naming the dotted key.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Applies "a.b.c=value" to `doc`. The value is read as JSON when it parses
/// and as a plain string otherwise. Throws gop::ConfigError.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a config file; a relative dataset path is taken relative to the file.
nlohmann::json load_config_document(const std::filesystem::path& path);

}  // namespace gopctl
