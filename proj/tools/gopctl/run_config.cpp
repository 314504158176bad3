#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "gop/errors.hpp"
#include "gop/random.hpp"

namespace gopctl {

using nlohmann::json;
using gop::ConfigError;

namespace {

constexpr std::uint64_t kTagSplit = 0x5b117;

json number(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

// Walks one JSON object, remembering which keys were read so that anything
// left over can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const std::string& key, double& out) {
    if (const json* v = get(key)) out = to_double(*v, key_path(key));
  }

  void read(const std::string& key, std::size_t& out) {
    if (const json* v = get(key)) out = to_size(*v, key_path(key));
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = get(key)) out = to_string(*v, key_path(key));
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + key_path(key) + "'");
    }
  }

  static double to_double(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError(path + ": expected a number");
  }

  static std::size_t to_size(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(path + ": expected a non-negative integer");
    return v.get<std::size_t>();
  }

  static std::string to_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    return v.get<std::string>();
  }

 private:
  std::string where() const { return path_.empty() ? std::string() : path_ + ": "; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string loss_token(gop::LossKind k) { return k == gop::LossKind::MSE ? "mse" : "cross_entropy"; }

gop::LossKind parse_loss(const std::string& s, const std::string& path) {
  if (s == "mse") return gop::LossKind::MSE;
  if (s == "cross_entropy") return gop::LossKind::CrossEntropySoftmax;
  throw ConfigError(path + ": unknown loss '" + s + "' (mse, cross_entropy)");
}

std::string reg_token(gop::WeightReg::Kind k) {
  switch (k) {
    case gop::WeightReg::Kind::None:
      return "none";
    case gop::WeightReg::Kind::Decay:
      return "decay";
    case gop::WeightReg::Kind::MaxNorm:
      break;
  }
  return "max_norm";
}

gop::WeightReg::Kind parse_reg(const std::string& s, const std::string& path) {
  if (s == "none") return gop::WeightReg::Kind::None;
  if (s == "decay") return gop::WeightReg::Kind::Decay;
  if (s == "max_norm") return gop::WeightReg::Kind::MaxNorm;
  throw ConfigError(path + ": unknown weight regularizer '" + s + "' (none, decay, max_norm)");
}

std::string metric_token(gop::CandidateMetric m) { return m == gop::CandidateMetric::MSE ? "mse" : "accuracy"; }

gop::CandidateMetric parse_candidate_metric(const std::string& s, const std::string& path) {
  if (s == "mse") return gop::CandidateMetric::MSE;
  if (s == "accuracy") return gop::CandidateMetric::Accuracy;
  throw ConfigError(path + ": unknown search metric '" + s + "' (mse, accuracy)");
}

json train_json(const gop::TrainSpec& t) {
  json schedule = json::array();
  for (const auto& s : t.schedule) schedule.push_back({{"learning_rate", s.learning_rate}, {"epochs", s.epochs}});
  return {{"schedule", std::move(schedule)},
          {"batch_size", t.batch_size},
          {"dropout_hidden", t.dropout_hidden},
          {"dropout_input", t.dropout_input},
          {"weight_reg", {{"kind", reg_token(t.weight_reg.kind)}, {"value", t.weight_reg.value}}},
          {"loss", loss_token(t.loss)},
          {"bn_momentum", t.bn_momentum},
          {"bn_epsilon", t.bn_epsilon}};
}

void read_train(const json& doc, gop::TrainSpec& t) {
  ObjectReader r(doc, "train");
  if (const json* sched = r.get("schedule")) {
    if (!sched->is_array()) throw ConfigError("train.schedule: expected an array");
    t.schedule.clear();
    for (std::size_t i = 0; i < sched->size(); ++i) {
      ObjectReader s((*sched)[i], "train.schedule[" + std::to_string(i) + "]");
      gop::LrStage stage{0.0, 0};
      s.read("learning_rate", stage.learning_rate);
      s.read("epochs", stage.epochs);
      s.finish();
      t.schedule.push_back(stage);
    }
  }
  r.read("batch_size", t.batch_size);
  r.read("dropout_hidden", t.dropout_hidden);
  r.read("dropout_input", t.dropout_input);
  if (const json* reg = r.get("weight_reg")) {
    ObjectReader w(*reg, "train.weight_reg");
    std::string kind = reg_token(t.weight_reg.kind);
    w.read("kind", kind);
    t.weight_reg.kind = parse_reg(kind, "train.weight_reg.kind");
    w.read("value", t.weight_reg.value);
    w.finish();
  }
  std::string loss = loss_token(t.loss);
  r.read("loss", loss);
  t.loss = parse_loss(loss, "train.loss");
  r.read("bn_momentum", t.bn_momentum);
  r.read("bn_epsilon", t.bn_epsilon);
  r.finish();
}

void read_progression(const json& doc, gop::ProgressionConfig& p) {
  ObjectReader r(doc, "progression");
  r.read("n_min", p.n_min);
  r.read("n_i", p.n_i);
  r.read("max_layer_width", p.max_layer_width);
  r.read("max_layers", p.max_layers);
  r.read("eps_n", p.eps_n);
  r.read("eps_l", p.eps_l);
  if (const json* v = r.get("rate_metric")) {
    const auto s = ObjectReader::to_string(*v, "progression.rate_metric");
    try {
      p.rate_metric = gop::parse_rate_metric(s);
    } catch (const gop::Error&) {
      throw ConfigError("progression.rate_metric: unknown metric '" + s + "' (loss, accuracy)");
    }
  }
  if (const json* v = r.get("c_grid")) {
    if (!v->is_array()) throw ConfigError("progression.c_grid: expected an array");
    p.c_grid.clear();
    for (std::size_t i = 0; i < v->size(); ++i)
      p.c_grid.push_back(ObjectReader::to_double((*v)[i], "progression.c_grid[" + std::to_string(i) + "]"));
  }
  std::string metric = metric_token(p.search_metric);
  r.read("search_metric", metric);
  p.search_metric = parse_candidate_metric(metric, "progression.search_metric");
  r.finish();
}

void read_dataset(const json& doc, DatasetConfig& d) {
  ObjectReader r(doc, "dataset");
  r.read("path", d.path);
  if (const json* v = r.get("label_column")) {
    if (v->is_null()) {
      d.csv.label_column.reset();
    } else if (v->is_number_integer()) {
      d.csv.label_column = std::to_string(ObjectReader::to_size(*v, "dataset.label_column"));
    } else {
      d.csv.label_column = ObjectReader::to_string(*v, "dataset.label_column");
    }
  }
  r.read("header", d.csv.header);
  if (const json* v = r.get("delimiter")) {
    const auto s = ObjectReader::to_string(*v, "dataset.delimiter");
    if (s.size() != 1) throw ConfigError("dataset.delimiter: expected a single character");
    d.csv.delimiter = s[0];
  }
  r.read("standardize_features", d.standardize_features);
  if (const json* v = r.get("split")) {
    ObjectReader s(*v, "dataset.split");
    s.read("train", d.split.train);
    s.read("val", d.split.val);
    s.read("test", d.split.test);
    s.read("stratified", d.stratified);
    s.finish();
  }
  r.finish();
}

}  // namespace

std::string to_token(Algorithm a) {
  switch (a) {
    case Algorithm::HeMLGOP:
      return "hemlgop";
    case Algorithm::HoMLGOP:
      return "homlgop";
    case Algorithm::HeMLRN:
      return "hemlrn";
    case Algorithm::HoMLRN:
      return "homlrn";
    case Algorithm::POP:
      return "pop";
    case Algorithm::PMLP:
      break;
  }
  return "pmlp";
}

Algorithm parse_algorithm(const std::string& token) {
  for (Algorithm a : {Algorithm::HeMLGOP, Algorithm::HoMLGOP, Algorithm::HeMLRN, Algorithm::HoMLRN, Algorithm::POP,
                      Algorithm::PMLP}) {
    if (to_token(a) == token) return a;
  }
  throw ConfigError("unknown variant '" + token + "' (hemlgop, homlgop, hemlrn, homlrn, pop, pmlp)");
}

bool is_layerwise(Algorithm a) noexcept { return a == Algorithm::POP || a == Algorithm::PMLP; }

void RunConfig::validate() const {
  if (dataset.path.empty()) throw ConfigError("dataset.path is not set");
  dataset.split.validate();
  if (out.empty()) throw ConfigError("out must not be empty");
  if (is_layerwise(algorithm)) {
    layerwise_config().validate();
  } else {
    progression_config().validate();
  }
}

gop::ProgressionConfig RunConfig::progression_config() const {
  gop::ProgressionConfig p = progression;
  p.variant = [this] {
    switch (algorithm) {
      case Algorithm::HoMLGOP:
        return gop::Variant::HoMLGOP;
      case Algorithm::HeMLRN:
        return gop::Variant::HeMLRN;
      case Algorithm::HoMLRN:
        return gop::Variant::HoMLRN;
      default:
        return gop::Variant::HeMLGOP;
    }
  }();
  p.seed = seed;
  p.train_spec.seed = seed;
  p.library.reset();
  return p;
}

gop::LayerwiseConfig RunConfig::layerwise_config() const {
  gop::LayerwiseConfig l;
  l.template_widths = template_widths;
  l.target_mse = target_mse;
  l.epochs_per_candidate = epochs_per_candidate;
  l.train_spec = progression.train_spec;
  l.train_spec.seed = seed;
  l.seed = seed;
  return l;
}

std::uint64_t RunConfig::split_seed() const noexcept { return gop::derive_seed({seed, kTagSplit}); }

json to_json(const RunConfig& c) {
  const auto& p = c.progression;
  json grid = json::array();
  for (double v : p.c_grid) grid.push_back(v);
  json label = c.dataset.csv.label_column ? json(*c.dataset.csv.label_column) : json(nullptr);
  return {
      {"seed", c.seed},
      {"variant", to_token(c.algorithm)},
      {"out", c.out},
      {"dataset",
       {{"path", c.dataset.path},
        {"label_column", std::move(label)},
        {"header", c.dataset.csv.header},
        {"delimiter", std::string(1, c.dataset.csv.delimiter)},
        {"standardize_features", c.dataset.standardize_features},
        {"split",
         {{"train", c.dataset.split.train},
          {"val", c.dataset.split.val},
          {"test", c.dataset.split.test},
          {"stratified", c.dataset.stratified}}}}},
      {"progression",
       {{"n_min", p.n_min},
        {"n_i", p.n_i},
        {"max_layer_width", p.max_layer_width},
        {"max_layers", p.max_layers},
        {"eps_n", number(p.eps_n)},
        {"eps_l", number(p.eps_l)},
        {"rate_metric", gop::to_token(p.rate_metric)},
        {"c_grid", std::move(grid)},
        {"search_metric", metric_token(p.search_metric)}}},
      {"train", train_json(p.train_spec)},
      {"baseline",
       {{"template", c.template_widths},
        {"target_mse", number(c.target_mse)},
        {"epochs_per_candidate", c.epochs_per_candidate}}},
  };
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  ObjectReader r(doc, "");
  if (const json* v = r.get("seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    c.seed = v->get<std::uint64_t>();
  }
  if (const json* v = r.get("variant")) c.algorithm = parse_algorithm(ObjectReader::to_string(*v, "variant"));
  r.read("out", c.out);
  if (const json* v = r.get("dataset")) read_dataset(*v, c.dataset);
  if (const json* v = r.get("progression")) read_progression(*v, c.progression);
  if (const json* v = r.get("train")) read_train(*v, c.progression.train_spec);
  if (const json* v = r.get("baseline")) {
    ObjectReader b(*v, "baseline");
    if (const json* t = b.get("template")) {
      if (!t->is_array()) throw ConfigError("baseline.template: expected an array");
      c.template_widths.clear();
      for (std::size_t i = 0; i < t->size(); ++i)
        c.template_widths.push_back(ObjectReader::to_size((*t)[i], "baseline.template[" + std::to_string(i) + "]"));
    }
    b.read("target_mse", c.target_mse);
    b.read("epochs_per_candidate", c.epochs_per_candidate);
    b.finish();
  }
  r.finish();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set: malformed key '" + key + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("--set: '" + key + "' does not name an object field");
      *node = json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

json load_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  json doc = json::parse(buf.str(), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file '" + path.string() + "' is not valid JSON");
  if (!doc.is_object()) throw ConfigError("config file '" + path.string() + "' must hold a JSON object");
  if (doc.contains("dataset") && doc["dataset"].is_object() && doc["dataset"].contains("path") &&
      doc["dataset"]["path"].is_string()) {
    const std::filesystem::path data = doc["dataset"]["path"].get<std::string>();
    if (!data.empty() && data.is_relative()) {
      doc["dataset"]["path"] = (std::filesystem::absolute(path).parent_path() / data).lexically_normal().string();
    }
  }
  return doc;
}

}  // namespace gopctl
