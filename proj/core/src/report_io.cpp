#include "gop/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "gop/errors.hpp"

namespace gop {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

json split_json(const SplitMetrics& m) { return {{"loss", m.loss}, {"accuracy", m.accuracy}}; }

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw FormatError(path + "." + key, "missing field");
  return obj.at(key);
}

double read_double(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw FormatError(path, "expected a number");
}

std::size_t read_size(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) throw FormatError(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

std::pair<std::string, std::string> split_key(const std::string& key) {
  const auto colon = key.find(':');
  if (colon == std::string::npos) return {"", key};
  return {key.substr(0, colon), key.substr(colon + 1)};
}

}  // namespace

json op_set_to_json(const OperatorSet& set) {
  return {{"nodal", std::string(to_token(set.nodal))},
          {"pool", std::string(to_token(set.pool))},
          {"activation", std::string(to_token(set.activation))}};
}

OperatorSet op_set_from_json(const json& j, const std::string& path) {
  auto token = [&](const char* key) {
    const json& v = field(j, key, path);
    if (!v.is_string()) throw FormatError(path + "." + key, "expected a string");
    return v.get<std::string>();
  };
  OperatorSet set;
  const auto nodal = parse_nodal(token("nodal"));
  if (!nodal) throw FormatError(path + ".nodal", "unknown operator token '" + token("nodal") + "'");
  const auto pool = parse_pool(token("pool"));
  if (!pool) throw FormatError(path + ".pool", "unknown operator token '" + token("pool") + "'");
  const auto act = parse_activation(token("activation"));
  if (!act) throw FormatError(path + ".activation", "unknown operator token '" + token("activation") + "'");
  set.nodal = *nodal;
  set.pool = *pool;
  set.activation = *act;
  return set;
}

json report_to_json(const ProgressionReport& report, bool include_timing) {
  json steps = json::array();
  for (const auto& s : report.steps) {
    json scores = json::array();
    for (const auto& c : s.candidate_scores) {
      if (!c) {
        scores.push_back(nullptr);
      } else if (std::isinf(*c)) {
        scores.push_back(*c > 0 ? "inf" : "-inf");
      } else {
        scores.push_back(*c);
      }
    }
    json step = {{"layer_index", s.layer_index},
                 {"step", s.step},
                 {"block_width", s.block_width},
                 {"chosen_op_set", op_set_to_json(s.chosen_op_set)},
                 {"best_c", s.best_c},
                 {"loss_before", s.loss_before},
                 {"loss_after", s.loss_after},
                 {"r_value", s.r_value},
                 {"accepted", s.accepted},
                 {"candidate_scores", std::move(scores)}};
    if (include_timing) step["wall_time"] = s.wall_time;
    steps.push_back(std::move(step));
  }

  json layers = json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"layer_index", l.layer_index},
                      {"width", l.width},
                      {"blocks", l.blocks},
                      {"metric_before", l.metric_before},
                      {"metric_after", l.metric_after},
                      {"r_value", l.r_value},
                      {"accepted", l.accepted}});
  }

  json trainings = json::array();
  for (const auto& t : report.candidate_trainings) {
    trainings.push_back({{"layer_index", t.layer_index},
                         {"pass", t.pass},
                         {"phase", t.phase},
                         {"hidden_op_set", op_set_to_json(t.hidden_op_set)},
                         {"output_op_set", op_set_to_json(t.output_op_set)},
                         {"loss", std::isinf(t.loss) ? json("inf") : json(t.loss)}});
  }

  json metrics = {{"train", split_json(report.final_metrics.train)}};
  metrics["val"] = report.final_metrics.val ? split_json(*report.final_metrics.val) : json(nullptr);
  metrics["test"] = report.final_metrics.test ? split_json(*report.final_metrics.test) : json(nullptr);

  json doc = {{"algorithm", report.algorithm},
              {"seed", report.seed},
              {"steps", std::move(steps)},
              {"layers", std::move(layers)},
              {"candidate_trainings", std::move(trainings)},
              {"template_exhausted", report.template_exhausted},
              {"final_metrics", std::move(metrics)},
              {"params", report.params},
              {"flops", report.flops},
              {"operator_histogram", report.operator_histogram},
              {"final_finetune_epochs", report.final_finetune.epochs.size()}};
  if (include_timing) doc["wall_time"] = report.wall_time;
  return doc;
}

ProgressionReport report_from_json(const json& doc) {
  if (!doc.is_object()) throw FormatError("$", "report must be a JSON object");
  ProgressionReport r;
  const json& algo = field(doc, "algorithm", "$");
  if (!algo.is_string()) throw FormatError("algorithm", "expected a string");
  r.algorithm = algo.get<std::string>();
  if (doc.contains("seed")) r.seed = field(doc, "seed", "$").get<std::uint64_t>();

  const json& steps = field(doc, "steps", "$");
  if (!steps.is_array()) throw FormatError("steps", "expected an array");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string p = "steps[" + std::to_string(i) + "]";
    const json& s = steps[i];
    StepRecord rec;
    rec.layer_index = read_size(field(s, "layer_index", p), p + ".layer_index");
    rec.step = read_size(field(s, "step", p), p + ".step");
    rec.block_width = read_size(field(s, "block_width", p), p + ".block_width");
    rec.chosen_op_set = op_set_from_json(field(s, "chosen_op_set", p), p + ".chosen_op_set");
    rec.loss_before = read_double(field(s, "loss_before", p), p + ".loss_before");
    rec.loss_after = read_double(field(s, "loss_after", p), p + ".loss_after");
    rec.r_value = read_double(field(s, "r_value", p), p + ".r_value");
    const json& acc = field(s, "accepted", p);
    if (!acc.is_boolean()) throw FormatError(p + ".accepted", "expected a boolean");
    rec.accepted = acc.get<bool>();
    if (s.contains("best_c")) rec.best_c = read_double(s.at("best_c"), p + ".best_c");
    if (s.contains("candidate_scores")) {
      const json& cs = s.at("candidate_scores");
      if (!cs.is_array()) throw FormatError(p + ".candidate_scores", "expected an array");
      for (std::size_t k = 0; k < cs.size(); ++k) {
        if (cs[k].is_null()) {
          rec.candidate_scores.emplace_back(std::nullopt);
        } else {
          rec.candidate_scores.emplace_back(
              read_double(cs[k], p + ".candidate_scores[" + std::to_string(k) + "]"));
        }
      }
    }
    r.steps.push_back(std::move(rec));
  }

  if (doc.contains("layers")) {
    const json& layers = doc.at("layers");
    if (!layers.is_array()) throw FormatError("layers", "expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layers[" + std::to_string(i) + "]";
      const json& l = layers[i];
      LayerRecord rec;
      rec.layer_index = read_size(field(l, "layer_index", p), p + ".layer_index");
      rec.width = read_size(field(l, "width", p), p + ".width");
      rec.blocks = read_size(field(l, "blocks", p), p + ".blocks");
      rec.metric_before = read_double(field(l, "metric_before", p), p + ".metric_before");
      rec.metric_after = read_double(field(l, "metric_after", p), p + ".metric_after");
      rec.r_value = read_double(field(l, "r_value", p), p + ".r_value");
      rec.accepted = field(l, "accepted", p).get<bool>();
      r.layers.push_back(rec);
    }
  }

  if (doc.contains("candidate_trainings")) {
    const json& trainings = doc.at("candidate_trainings");
    if (!trainings.is_array()) throw FormatError("candidate_trainings", "expected an array");
    for (std::size_t i = 0; i < trainings.size(); ++i) {
      const std::string p = "candidate_trainings[" + std::to_string(i) + "]";
      const json& t = trainings[i];
      CandidateTraining rec;
      rec.layer_index = read_size(field(t, "layer_index", p), p + ".layer_index");
      rec.pass = read_size(field(t, "pass", p), p + ".pass");
      const json& phase = field(t, "phase", p);
      if (!phase.is_string()) throw FormatError(p + ".phase", "expected a string");
      rec.phase = phase.get<std::string>();
      rec.hidden_op_set = op_set_from_json(field(t, "hidden_op_set", p), p + ".hidden_op_set");
      rec.output_op_set = op_set_from_json(field(t, "output_op_set", p), p + ".output_op_set");
      rec.loss = read_double(field(t, "loss", p), p + ".loss");
      r.candidate_trainings.push_back(std::move(rec));
    }
  }

  const json& hist = field(doc, "operator_histogram", "$");
  if (!hist.is_object()) throw FormatError("operator_histogram", "expected an object");
  for (const auto& [key, value] : hist.items())
    r.operator_histogram[key] = read_size(value, "operator_histogram." + key);

  if (doc.contains("params")) r.params = doc.at("params").get<std::uint64_t>();
  if (doc.contains("flops")) r.flops = doc.at("flops").get<std::uint64_t>();
  if (doc.contains("template_exhausted")) r.template_exhausted = doc.at("template_exhausted").get<bool>();
  if (doc.contains("final_metrics")) {
    const json& m = doc.at("final_metrics");
    auto read_split = [&](const char* key) -> std::optional<SplitMetrics> {
      if (!m.contains(key) || m.at(key).is_null()) return std::nullopt;
      const std::string p = std::string("final_metrics.") + key;
      return SplitMetrics{read_double(field(m.at(key), "loss", p), p + ".loss"),
                          read_double(field(m.at(key), "accuracy", p), p + ".accuracy")};
    };
    if (auto t = read_split("train")) r.final_metrics.train = *t;
    r.final_metrics.val = read_split("val");
    r.final_metrics.test = read_split("test");
  }
  return r;
}

json timing_to_json(const ProgressionReport& report) {
  json steps = json::array();
  for (const auto& s : report.steps)
    steps.push_back({{"layer_index", s.layer_index}, {"step", s.step}, {"wall_time", s.wall_time}});
  return {{"algorithm", report.algorithm}, {"wall_time", report.wall_time}, {"steps", std::move(steps)}};
}

std::string trainlog_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch,learning_rate,train_loss,val_loss,val_accuracy\n";
  for (const auto& e : log.epochs)
    out << e.epoch << ',' << num(e.learning_rate) << ',' << num(e.train_loss) << ',' << num(e.val_loss) << ','
        << num(e.val_accuracy) << '\n';
  return out.str();
}

std::string histogram_csv(const std::map<std::string, std::size_t>& histogram) {
  std::ostringstream out;
  out << "category,operator,count\n";
  for (const auto& [key, count] : histogram) {
    const auto [cat, op] = split_key(key);
    out << cat << ',' << op << ',' << count << '\n';
  }
  return out.str();
}

std::string steps_csv(const ProgressionReport& report) {
  std::ostringstream out;
  out << "layer,step,block_width,op_set,loss_before,loss_after,r_value,accepted\n";
  for (const auto& s : report.steps)
    out << s.layer_index << ',' << s.step << ',' << s.block_width << ',' << to_string(s.chosen_op_set) << ','
        << num(s.loss_before) << ',' << num(s.loss_after) << ',' << num(s.r_value) << ','
        << (s.accepted ? "true" : "false") << '\n';
  return out.str();
}

std::string histogram_markdown(const std::map<std::string, std::size_t>& histogram) {
  std::ostringstream out;
  out << "| category | operator | count |\n|---|---|---|\n";
  for (const auto& [key, count] : histogram) {
    const auto [cat, op] = split_key(key);
    out << "| " << cat << " | " << op << " | " << count << " |\n";
  }
  return out.str();
}

std::string steps_markdown(const ProgressionReport& report) {
  std::ostringstream out;
  out << "| layer | step | width | operator set | before | after | r | accepted |\n"
         "|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : report.steps)
    out << "| " << s.layer_index << " | " << s.step << " | " << s.block_width << " | " << to_string(s.chosen_op_set)
        << " | " << num(s.loss_before) << " | " << num(s.loss_after) << " | " << num(s.r_value) << " | "
        << (s.accepted ? "yes" : "no") << " |\n";
  return out.str();
}

}  // namespace gop
