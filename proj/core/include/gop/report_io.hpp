#pragma once

// JSON and CSV renderings of progression reports and training logs.

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "gop/progression.hpp"

namespace gop {

nlohmann::json op_set_to_json(const OperatorSet& set);
/// Throws FormatError naming `path` on bad input.
OperatorSet op_set_from_json(const nlohmann::json& j, const std::string& path);

/// Wall times are left out unless `include_timing` is set, so that two runs
/// with the same inputs produce identical documents.
nlohmann::json report_to_json(const ProgressionReport& report, bool include_timing = false);
/// Reads the fields written by report_to_json. Throws FormatError.
ProgressionReport report_from_json(const nlohmann::json& doc);

/// Per-step and total wall times in seconds.
nlohmann::json timing_to_json(const ProgressionReport& report);

/// epoch,learning_rate,train_loss,val_loss,val_accuracy
std::string trainlog_csv(const TrainLog& log);
/// category,operator,count
std::string histogram_csv(const std::map<std::string, std::size_t>& histogram);
/// layer,step,block_width,op_set,loss_before,loss_after,r_value,accepted
std::string steps_csv(const ProgressionReport& report);

std::string histogram_markdown(const std::map<std::string, std::size_t>& histogram);
std::string steps_markdown(const ProgressionReport& report);

}  // namespace gop
