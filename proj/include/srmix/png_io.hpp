#pragma once

#include <filesystem>

#include "srmix/image.hpp"

namespace srmix {

/// Decodes an 8- or 16-bit truecolour RGB PNG, scaling samples by
/// 1 / (2^depth - 1). Palette, grey and alpha images are rejected.
ImageBuffer load_image(const std::filesystem::path& path);

/// Writes an RGB PNG. Samples are clamped to [0,1] and rounded to the
/// nearest code value. bit_depth must be 8 or 16.
void save_image(const std::filesystem::path& path, const ImageBuffer& image, int bit_depth = 8);

/// Rounds every sample to the nearest 8-bit code value, exactly as
/// save_image(..., 8) followed by load_image would.
ImageBuffer quantize8(const ImageBuffer& image);

}  // namespace srmix
