#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gop/network.hpp"

namespace gop {

/// Current model document version.
inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON model document:
///
///   {version, input_dim, C,
///    layers: [{blocks: [{op_set: {nodal, pool, activation}, shape: [fan_in, width],
///                        weights: [...row-major, one row per input...], bias: [...]}],
///              norm: {mode, mean, std, scale, shift}}],
///    output: {shape: [last_width, C], weights: [...], bias: [...], op_set?}}
///
/// Doubles are written with round-trip precision, so a document reproduces
/// every finite weight bit-exactly. Unknown top-level keys are ignored.
nlohmann::json serialize(const GopNetwork& net);

/// Throws FormatError naming the offending field path, e.g.
/// "layers[0].blocks[1].op_set.nodal".
GopNetwork deserialize(const nlohmann::json& doc);

GopNetwork load_model(const std::filesystem::path& path);

/// Writes `contents` to `path` via a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string dump_json(const nlohmann::json& doc);

}  // namespace gop
