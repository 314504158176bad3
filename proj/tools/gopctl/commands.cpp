#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gop/baselines.hpp"
#include "gop/errors.hpp"
#include "gop/model_io.hpp"
#include "gop/report_io.hpp"

namespace gopctl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vector_json(const gop::Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

gop::Vector vector_from_json(const json& a, const std::string& path) {
  if (!a.is_array()) throw gop::FormatError(path, "expected an array");
  gop::Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw gop::FormatError(path + "[" + std::to_string(i) + "]", "expected a number");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw gop::ConfigError(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  json doc = json::parse(buf.str(), nullptr, false);
  if (doc.is_discarded()) throw gop::FormatError("", path.string() + " is not valid JSON");
  return doc;
}

json metrics_json(const gop::SplitMetrics& m) { return {{"loss", m.loss}, {"accuracy", m.accuracy}}; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct TrainArgs {
  std::string config;
  std::string variant;
  std::string out;
  std::string data;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> sets;
  std::vector<std::size_t> template_widths;
  std::optional<double> target_mse;
};

RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets) {
  json doc = config_path.empty() ? json::object() : load_config_document(config_path);
  for (const auto& s : sets) apply_override(doc, s);
  return run_config_from_json(doc);
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = resolve_config(a.config, a.sets);
  if (!a.variant.empty()) cfg.algorithm = parse_algorithm(a.variant);
  if (!a.out.empty()) cfg.out = a.out;
  if (!a.data.empty()) cfg.dataset.path = fs::absolute(a.data).lexically_normal().string();
  if (!a.template_widths.empty()) cfg.template_widths = a.template_widths;
  if (a.target_mse) cfg.target_mse = *a.target_mse;
  cfg.validate();

  if (a.seeds.empty()) {
    const TrainResult r = train_to_directory(cfg, cfg.out);
    const auto& m = r.report.final_metrics;
    out << to_token(cfg.algorithm) << " seed " << cfg.seed << ": params " << r.report.params << ", flops "
        << r.report.flops;
    if (m.test) out << ", test accuracy " << m.test->accuracy;
    out << " -> " << cfg.out << "\n";
    return kExitOk;
  }

  json runs = json::array();
  std::vector<double> params, flops, test_acc, test_loss, val_acc, train_loss;
  for (std::uint64_t seed : a.seeds) {
    RunConfig c = cfg;
    c.seed = seed;
    const fs::path dir = fs::path(cfg.out) / ("seed_" + std::to_string(seed));
    c.out = dir.string();
    const TrainResult r = train_to_directory(c, dir);
    const auto& m = r.report.final_metrics;
    json run = {{"seed", seed},
                {"dir", dir.string()},
                {"params", r.report.params},
                {"flops", r.report.flops},
                {"train", metrics_json(m.train)},
                {"val", m.val ? metrics_json(*m.val) : json(nullptr)},
                {"test", m.test ? metrics_json(*m.test) : json(nullptr)}};
    runs.push_back(std::move(run));
    params.push_back(static_cast<double>(r.report.params));
    flops.push_back(static_cast<double>(r.report.flops));
    train_loss.push_back(m.train.loss);
    if (m.val) val_acc.push_back(m.val->accuracy);
    if (m.test) {
      test_acc.push_back(m.test->accuracy);
      test_loss.push_back(m.test->loss);
    }
    out << to_token(cfg.algorithm) << " seed " << seed << ": params " << r.report.params;
    if (m.test) out << ", test accuracy " << m.test->accuracy;
    out << " -> " << dir.string() << "\n";
  }
  json med = {{"params", median(params)}, {"flops", median(flops)}, {"train_loss", median(train_loss)}};
  if (!val_acc.empty()) med["val_accuracy"] = median(val_acc);
  if (!test_acc.empty()) {
    med["test_accuracy"] = median(test_acc);
    med["test_loss"] = median(test_loss);
  }
  const json summary = {{"variant", to_token(cfg.algorithm)}, {"seeds", a.seeds}, {"runs", runs}, {"median", med}};
  gop::write_file_atomic(fs::path(cfg.out) / "summary.json", gop::dump_json(summary));
  out << "median:";
  for (const auto& [k, v] : med.items()) out << ' ' << k << '=' << v.get<double>();
  out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string config;
  std::string data;
  std::string split;
  std::string label_column;
  std::vector<std::string> sets;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const json doc = read_json_file(a.model, "model file");
  const gop::GopNetwork net = gop::deserialize(doc);
  const std::size_t dim = net.input_dim();

  gop::FeatureScaling scaling = gop::FeatureScaling::identity(dim);
  if (doc.contains("input_scaling")) {
    const json& s = doc.at("input_scaling");
    if (!s.is_object() || !s.contains("mean") || !s.contains("std"))
      throw gop::FormatError("input_scaling", "expected {mean, std}");
    scaling.mean = vector_from_json(s.at("mean"), "input_scaling.mean");
    scaling.std = vector_from_json(s.at("std"), "input_scaling.std");
    if (static_cast<std::size_t>(scaling.mean.size()) != dim || static_cast<std::size_t>(scaling.std.size()) != dim)
      throw gop::FormatError("input_scaling", "length differs from the model input dimension");
  }

  gop::Dataset ds;
  std::vector<std::size_t> rows;
  std::string split = a.split;
  if (!a.config.empty()) {
    RunConfig cfg = resolve_config(a.config, a.sets);
    if (!a.data.empty()) cfg.dataset.path = fs::absolute(a.data).lexically_normal().string();
    if (!a.label_column.empty()) cfg.dataset.csv.label_column = a.label_column;
    if (cfg.dataset.path.empty()) throw gop::ConfigError("dataset.path is not set");
    cfg.dataset.split.validate();
    ds = gop::load_csv(cfg.dataset.path, cfg.dataset.csv);
    if (split.empty()) split = "test";
    if (split == "all") {
      for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back(i);
    } else {
      const auto idx = gop::split_dataset(ds, cfg.dataset.split, cfg.split_seed(), cfg.dataset.stratified);
      if (split == "train") rows = idx.train;
      else if (split == "val") rows = idx.val;
      else if (split == "test") rows = idx.test;
      else throw gop::ConfigError("unknown split '" + split + "' (train, val, test, all)");
    }
  } else {
    if (a.data.empty()) throw gop::ConfigError("eval needs --config or --data");
    if (!split.empty() && split != "all") throw gop::ConfigError("--split needs --config to reproduce the partition");
    split = "all";
    gop::CsvOptions csv;
    if (!a.label_column.empty()) csv.label_column = a.label_column;
    ds = gop::load_csv(a.data, csv);
    for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back(i);
  }
  if (rows.empty()) throw gop::ConfigError("split '" + split + "' is empty");
  if (static_cast<std::size_t>(ds.X.cols()) != dim)
    throw gop::DimensionMismatch("model expects " + std::to_string(dim) + " features, data has " +
                                 std::to_string(ds.X.cols()));

  // Labels are matched by name when the model knows its classes.
  std::vector<std::size_t> label_map(ds.num_classes);
  for (std::size_t c = 0; c < ds.num_classes; ++c) label_map[c] = c;
  if (doc.contains("class_names") && doc.at("class_names").is_array()) {
    const auto names = doc.at("class_names").get<std::vector<std::string>>();
    for (std::size_t c = 0; c < ds.num_classes; ++c) {
      const auto it = std::find(names.begin(), names.end(), ds.class_names[c]);
      if (it == names.end())
        throw gop::DimensionMismatch("label '" + ds.class_names[c] + "' is not one of the model's classes");
      label_map[c] = static_cast<std::size_t>(it - names.begin());
    }
  }
  for (auto& y : ds.y) y = label_map[y];
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    if (label_map[c] >= net.num_outputs())
      throw gop::DimensionMismatch("data has more classes than the model has outputs");
  }
  ds.num_classes = net.num_outputs();

  gop::LabeledSet set = gop::subset(ds, rows);
  set.X = scaling.apply(set.X);
  const gop::SplitMetrics m = gop::evaluate_split(net, set);
  const json result = {{"split", split},
                       {"samples", rows.size()},
                       {"accuracy", m.accuracy},
                       {"loss", m.loss},
                       {"params", gop::count_params(net)},
                       {"flops", gop::count_flops(net)}};
  out << result.dump(2) << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::string report;
  std::string format = "markdown";
  std::string out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const gop::ProgressionReport report = gop::report_from_json(read_json_file(a.report, "report file"));
  const bool csv = a.format == "csv";
  const std::string hist = csv ? gop::histogram_csv(report.operator_histogram)
                               : gop::histogram_markdown(report.operator_histogram);
  const std::string steps = csv ? gop::steps_csv(report) : gop::steps_markdown(report);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    const std::string ext = csv ? ".csv" : ".md";
    gop::write_file_atomic(fs::path(a.out) / ("operators" + ext), hist);
    gop::write_file_atomic(fs::path(a.out) / ("steps" + ext), steps);
  }
  out << hist << "\n" << steps;
  return kExitOk;
}

int cmd_count(const std::string& model, bool flops, std::ostream& out) {
  const gop::GopNetwork net = gop::deserialize(read_json_file(model, "model file"));
  out << (flops ? gop::count_flops(net) : gop::count_params(net)) << "\n";
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const gop::ConfigError*>(&e) || dynamic_cast<const gop::UnknownLabelColumn*>(&e))
    return kExitConfig;
  return kExitRuntime;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
  PreparedData p;
  p.dataset = gop::load_csv(config.dataset.path, config.dataset.csv);
  p.dataset.split = gop::split_dataset(p.dataset, config.dataset.split, config.split_seed(), config.dataset.stratified);
  p.scaling = config.dataset.standardize_features
                  ? gop::fit_train_scaling(p.dataset)
                  : gop::FeatureScaling::identity(static_cast<std::size_t>(p.dataset.X.cols()));
  p.data = gop::to_training_data(p.dataset, p.scaling);
  return p;
}

json model_document(const gop::GopNetwork& net, const gop::FeatureScaling& scaling,
                    const std::vector<std::string>& class_names) {
  json doc = gop::serialize(net);
  doc["input_scaling"] = {{"mean", vector_json(scaling.mean)}, {"std", vector_json(scaling.std)}};
  doc["class_names"] = class_names;
  return doc;
}

TrainResult train_to_directory(const RunConfig& config, const fs::path& dir) {
  config.validate();
  const PreparedData p = prepare_data(config);

  std::pair<gop::GopNetwork, gop::ProgressionReport> result = [&] {
    switch (config.algorithm) {
      case Algorithm::POP:
        return gop::run_pop_baseline(p.data, config.layerwise_config());
      case Algorithm::PMLP:
        return gop::run_pmlp_baseline(p.data, config.layerwise_config());
      default:
        return gop::run_progression(p.data, config.progression_config());
    }
  }();
  auto& [net, report] = result;

  fs::create_directories(dir);
  RunConfig persisted = config;
  persisted.out = dir.string();
  gop::write_file_atomic(dir / "config.json", gop::dump_json(to_json(persisted)));
  gop::write_file_atomic(dir / "model.json", gop::dump_json(model_document(net, p.scaling, p.dataset.class_names)));
  gop::write_file_atomic(dir / "report.json", gop::dump_json(gop::report_to_json(report)));
  gop::write_file_atomic(dir / "trainlog.csv", gop::trainlog_csv(report.final_finetune));
  gop::write_file_atomic(dir / "operators.csv", gop::histogram_csv(report.operator_histogram));
  gop::write_file_atomic(dir / "steps.csv", gop::steps_csv(report));
  gop::write_file_atomic(dir / "timing.json", gop::dump_json(gop::timing_to_json(report)));
  return {std::move(net), std::move(report)};
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Progressive GOP network builder"};
  app.name("gopctl");
  app.require_subcommand(1);

  TrainArgs train;
  double target_mse = 0.0;
  auto* t = app.add_subcommand("train", "Grow a network and write model.json, report.json and trainlog.csv");
  t->add_option("--config", train.config, "JSON run configuration");
  t->add_option("--variant", train.variant, "hemlgop, homlgop, hemlrn, homlrn, pop or pmlp");
  t->add_option("--seeds", train.seeds, "Comma-separated seeds; each run goes to <out>/seed_<n>")->delimiter(',');
  t->add_option("--out", train.out, "Output directory");
  t->add_option("--data", train.data, "CSV dataset (overrides dataset.path)");
  t->add_option("--set", train.sets, "Override a config field, e.g. progression.eps_n=0.01");
  t->add_option("--template", train.template_widths, "Layer widths for pop/pmlp, e.g. 200,200")->delimiter(',');
  auto* target_opt = t->add_option("--target-mse", target_mse, "Training MSE that stops pop/pmlp layer growth");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Print accuracy, loss, params and flops of a model as JSON");
  e->add_option("--model", eval.model, "model.json")->required();
  e->add_option("--config", eval.config, "Run configuration whose dataset and split to use");
  e->add_option("--data", eval.data, "CSV dataset");
  e->add_option("--split", eval.split, "train, val, test (default with --config) or all");
  e->add_option("--label-column", eval.label_column, "Label column name or 0-based index");
  e->add_option("--set", eval.sets, "Override a config field");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Operator distribution and per-step improvement tables");
  r->add_option("report", rep.report, "report.json")->required();
  r->add_option("--format", rep.format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  r->add_option("--out", rep.out, "Also write operators.* and steps.* into this directory");

  std::string flops_model, params_model;
  auto* f = app.add_subcommand("flops", "Inference FLOPs per sample of a model");
  f->add_option("--model", flops_model, "model.json")->required();
  auto* p = app.add_subcommand("params", "Parameter count of a model");
  p->add_option("--model", params_model, "model.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (t->parsed()) {
      if (target_opt->count() > 0) train.target_mse = target_mse;
      return cmd_train(train, out);
    }
    if (e->parsed()) return cmd_eval(eval, out);
    if (r->parsed()) return cmd_report(rep, out);
    if (f->parsed()) return cmd_count(flops_model, true, out);
    if (p->parsed()) return cmd_count(params_model, false, out);
  } catch (const std::exception& ex) {
    err << "gopctl: " << ex.what() << "\n";
    return exit_code_for(ex);
  }
  return kExitConfig;
}

}  // namespace gopctl
