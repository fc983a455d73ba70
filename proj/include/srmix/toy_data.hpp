#pragma once

#include <cstdint>
#include <filesystem>

#include "srmix/image.hpp"
#include "srmix/rng.hpp"

namespace srmix {

/// One procedurally drawn RGB image: a colour gradient, a few sinusoidal
/// gratings and antialiased discs/boxes, and a faint texture. Fully
/// determined by the rng state.
ImageBuffer toy_image(int size, Rng& rng);

struct ToyDatasetSpec {
  int size = 128;
  int train_pairs = 6;
  int val_pairs = 2;
  int extra_hr = 8;
  double sigma_read = 0.01;
  double sigma_shot = 0.04;
  std::uint64_t seed = 2024;
};

/// Writes root/{train,val}/{hr,lr}/NNN.png and root/extra/hr/NNN.png.
/// LR images are bicubic x4 down/up plus signal-dependent noise, stored as
/// 8-bit PNG. Identical specs produce identical files.
void write_toy_dataset(const std::filesystem::path& root, const ToyDatasetSpec& spec);

}  // namespace srmix
