#pragma once

#include <filesystem>
#include <string>

#include "srmix/model.hpp"

namespace srmix {

/// Binary weights container: magic, format version, the model configuration,
/// one named little-endian float32 blob per parameter tensor, and a trailing
/// FNV-1a 64 checksum of everything before it. Parent directories are created.
void save_weights(const std::filesystem::path& path, const ModelWeights& weights);

/// Throws FileNotFound, or MalformedWeights for a bad magic, version,
/// checksum, truncation, or tensor names/shapes that disagree with the layout
/// implied by the stored configuration.
ModelWeights load_weights(const std::filesystem::path& path);

/// 16 hex digits identifying the configuration and parameter values.
std::string weights_checksum(const ModelWeights& weights);

}  // namespace srmix
