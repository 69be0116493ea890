#pragma once

#include <filesystem>
#include <utility>

#include "videomind/decoder.hpp"

namespace videomind {

/// Writes <manifest> (JSON: config, tensor name/shape/offset) and the
/// little-endian f64 blob beside it. Round-trips bit-exactly.
void save_weights(const std::filesystem::path& manifest, const DecoderWeights& w, const DecoderConfig& cfg);

/// Throws ShapeError naming the tensor when the file disagrees with the
/// config it declares.
std::pair<DecoderWeights, DecoderConfig> load_weights(const std::filesystem::path& manifest);

}  // namespace videomind
