#include "gop/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace gop {

using nlohmann::json;

namespace {

json to_array(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// Row-major flattening: row r holds the weights leaving input unit r.
json to_array(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

json op_set_json(const OperatorSet& s) {
  return json{{"nodal", std::string(to_token(s.nodal))},
              {"pool", std::string(to_token(s.pool))},
              {"activation", std::string(to_token(s.activation))}};
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw FormatError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::size_t read_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw FormatError(path, "expected a non-negative integer");
  return v.get<std::size_t>();
}

double read_double(const json& v, const std::string& path) {
  if (!v.is_number()) throw FormatError(path, "expected a number");
  return v.get<double>();
}

Vector read_vector(const json& v, std::size_t expected, const std::string& path) {
  if (!v.is_array()) throw FormatError(path, "expected an array");
  if (v.size() != expected)
    throw FormatError(path, "expected " + std::to_string(expected) + " values, got " +
                                std::to_string(v.size()));
  Vector out(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i)
    out[static_cast<Eigen::Index>(i)] = read_double(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

std::pair<std::size_t, std::size_t> read_shape(const json& obj, const std::string& path) {
  const auto p = join(path, "shape");
  const json& s = field(obj, "shape", path);
  if (!s.is_array() || s.size() != 2) throw FormatError(p, "expected [rows, cols]");
  return {read_count(s[0], p + "[0]"), read_count(s[1], p + "[1]")};
}

Matrix read_matrix(const json& obj, const std::string& path, std::size_t rows, std::size_t cols) {
  const auto p = join(path, "weights");
  const Vector flat = read_vector(field(obj, "weights", path), rows * cols, p);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          flat[static_cast<Eigen::Index>(r * cols + c)];
  return m;
}

std::string read_token(const json& obj, const std::string& key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_string()) throw FormatError(join(path, key), "expected a string token");
  return v.get<std::string>();
}

OperatorSet read_op_set(const json& obj, const std::string& path) {
  const auto nodal = read_token(obj, "nodal", path);
  const auto pool = read_token(obj, "pool", path);
  const auto act = read_token(obj, "activation", path);
  OperatorSet s;
  if (auto n = parse_nodal(nodal)) s.nodal = *n;
  else throw FormatError(join(path, "nodal"), "unknown operator token '" + nodal + "'");
  if (auto p = parse_pool(pool)) s.pool = *p;
  else throw FormatError(join(path, "pool"), "unknown operator token '" + pool + "'");
  if (auto a = parse_activation(act)) s.activation = *a;
  else throw FormatError(join(path, "activation"), "unknown operator token '" + act + "'");
  return s;
}

}  // namespace

json serialize(const GopNetwork& net) {
  json layers = json::array();
  for (const auto& layer : net.layers()) {
    json blocks = json::array();
    for (const auto& b : layer.blocks) {
      blocks.push_back(json{{"op_set", op_set_json(b.op_set)},
                            {"shape", {b.fan_in(), b.width()}},
                            {"weights", to_array(b.weights)},
                            {"bias", to_array(b.bias)}});
    }
    const auto& n = layer.norm;
    layers.push_back(json{
        {"blocks", std::move(blocks)},
        {"norm",
         {{"mode", n.mode == NormMode::Standardize ? "standardize" : "batchnorm"},
          {"mean", to_array(n.mean)},
          {"std", to_array(n.std)},
          {"scale", to_array(n.scale)},
          {"shift", to_array(n.shift)}}}});
  }
  json output{{"shape", {net.output_weights().rows(), net.output_weights().cols()}},
              {"weights", to_array(net.output_weights())},
              {"bias", to_array(net.output_bias())}};
  if (net.output_op_set()) output["op_set"] = op_set_json(*net.output_op_set());
  return json{{"version", kModelFormatVersion},
              {"input_dim", net.input_dim()},
              {"C", net.num_outputs()},
              {"layers", std::move(layers)},
              {"output", std::move(output)}};
}

GopNetwork deserialize(const json& doc) {
  if (!doc.is_object()) throw FormatError("", "model document must be a JSON object");
  const json& version = field(doc, "version", "");
  if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion)
    throw FormatError("version", "unsupported model version " + version.dump() + " (expected " +
                                     std::to_string(kModelFormatVersion) + ")");
  const std::size_t input_dim = read_count(field(doc, "input_dim", ""), "input_dim");
  const std::size_t classes = read_count(field(doc, "C", ""), "C");

  const json& layers_json = field(doc, "layers", "");
  if (!layers_json.is_array()) throw FormatError("layers", "expected an array");

  std::vector<GopLayer> layers;
  std::size_t fan_in = input_dim;
  for (std::size_t l = 0; l < layers_json.size(); ++l) {
    const std::string lp = "layers[" + std::to_string(l) + "]";
    const json& lj = layers_json[l];
    const json& blocks_json = field(lj, "blocks", lp);
    if (!blocks_json.is_array()) throw FormatError(lp + ".blocks", "expected an array");
    GopLayer layer;
    for (std::size_t b = 0; b < blocks_json.size(); ++b) {
      const std::string bp = lp + ".blocks[" + std::to_string(b) + "]";
      const json& bj = blocks_json[b];
      NeuronBlock block;
      block.op_set = read_op_set(field(bj, "op_set", bp), bp + ".op_set");
      const auto [rows, cols] = read_shape(bj, bp);
      if (rows != fan_in)
        throw FormatError(bp + ".shape", "fan_in " + std::to_string(rows) + " does not match " +
                                             std::to_string(fan_in));
      block.weights = read_matrix(bj, bp, rows, cols);
      block.bias = read_vector(field(bj, "bias", bp), cols, bp + ".bias");
      layer.blocks.push_back(std::move(block));
    }
    const std::size_t width = layer.width();
    const std::string np = lp + ".norm";
    const json& nj = field(lj, "norm", lp);
    const auto mode = read_token(nj, "mode", np);
    if (mode == "standardize") layer.norm.mode = NormMode::Standardize;
    else if (mode == "batchnorm") layer.norm.mode = NormMode::BatchNorm;
    else throw FormatError(np + ".mode", "unknown normalization mode '" + mode + "'");
    layer.norm.mean = read_vector(field(nj, "mean", np), width, np + ".mean");
    layer.norm.std = read_vector(field(nj, "std", np), width, np + ".std");
    layer.norm.scale = read_vector(field(nj, "scale", np), width, np + ".scale");
    layer.norm.shift = read_vector(field(nj, "shift", np), width, np + ".shift");
    fan_in = width;
    layers.push_back(std::move(layer));
  }

  const json& oj = field(doc, "output", "");
  const auto [rows, cols] = read_shape(oj, "output");
  if (rows != fan_in || cols != classes)
    throw FormatError("output.shape", "expected [" + std::to_string(fan_in) + ", " +
                                          std::to_string(classes) + "]");
  Matrix ow = read_matrix(oj, "output", rows, cols);
  Vector ob = read_vector(field(oj, "bias", "output"), cols, "output.bias");
  std::optional<OperatorSet> out_ops;
  if (oj.contains("op_set")) out_ops = read_op_set(oj["op_set"], "output.op_set");

  try {
    return GopNetwork(input_dim, std::move(layers), std::move(ow), std::move(ob), out_ops);
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError("", e.what());
  }
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

GopNetwork load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("", "cannot open model file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("", std::string("invalid JSON: ") + e.what());
  }
  return deserialize(doc);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  auto tmp = dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gop
