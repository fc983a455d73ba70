#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>

#include "srmix/image.hpp"
#include "srmix/manifest.hpp"
#include "srmix/metrics.hpp"
#include "srmix/rng.hpp"
#include "srmix/training.hpp"

namespace srmix {

/// Catmull-Rom style cubic convolution kernel with a = -0.5.
double cubic_kernel(double x) noexcept;

/// Separable bicubic resize. When shrinking, the kernel is stretched by the
/// scale factor (antialiasing, as in MATLAB imresize). Out-of-range taps
/// replicate the edge pixel. Output is clamped to [0,1].
ImageBuffer bicubic_resize(const ImageBuffer& image, int out_height, int out_width);

/// Downsample by `factor` and upsample back to the original size.
/// Throws NotDivisible unless both dimensions are multiples of factor.
ImageBuffer bicubic_degrade(const ImageBuffer& hr, int factor);

/// Adds i.i.d. N(0, sigma^2) per sample and clamps.
ImageBuffer add_gaussian_noise(const ImageBuffer& image, double sigma, Rng& rng);

/// Poisson-Gaussian approximation: per-sample std sqrt(read^2 + shot^2 * v)
/// with v the clean value. Clamped.
ImageBuffer add_signal_dependent_noise(const ImageBuffer& image, double sigma_read,
                                       double sigma_shot, Rng& rng);

enum class DegradationKind { bicubic_x4, gaussian_noise, bicubic_x4_plus_noise, learned };

std::string_view to_string(DegradationKind kind) noexcept;
DegradationKind parse_degradation_kind(std::string_view text);

struct DegradationSpec {
  DegradationKind kind = DegradationKind::bicubic_x4;
  /// gaussian_noise: white noise std in [0,1] units (25/255 for "sigma 25").
  double sigma = 0.0;
  /// bicubic_x4_plus_noise: signal-dependent noise parameters.
  double sigma_read = 0.0;
  double sigma_shot = 0.0;
  /// learned: g weights file.
  std::filesystem::path weights_path;

  /// Throws InvalidConfig when fields do not match the kind.
  void validate() const;
};

/// Applies an analytic degradation (everything but `learned`).
ImageBuffer apply_analytic_degradation(const DegradationSpec& spec, const ImageBuffer& hr,
                                       Rng& rng);

/// Trains g (HR -> LR) on observed pairs with the SR training loop; the
/// returned `best` weights are the best-validation checkpoint.
/// Throws EmptyDataset for an empty `paired` manifest.
TrainResult train_degradation(const DatasetManifest& paired, const DatasetManifest& val,
                              const ModelConfig& model_config, const TrainConfig& config,
                              const TrainHooks& hooks = {});

struct SyntheticSet {
  DatasetManifest manifest;  // origin == synthetic, both paths present
  DegradationSpec spec;
};

/// Writes degrade(y) for every HR record into out_dir as 8-bit PNG and
/// returns the synthetic manifest (same order as the input). Also writes
/// out_dir/degradation.txt describing `spec` and `weights_checksum`.
SyntheticSet synthesize_lr(const ImageModel& degrade, const DatasetManifest& hr_manifest,
                           const std::filesystem::path& out_dir, const DegradationSpec& spec,
                           const std::string& weights_checksum = "-");

/// Either a fraction in [0,1] or every synthetic record.
struct SyntheticFraction {
  bool all = false;
  double value = 0.0;

  static SyntheticFraction everything() noexcept { return {true, 1.0}; }
  static SyntheticFraction of(double fraction);
  static SyntheticFraction parse(std::string_view text);
  std::string to_string() const;
  std::size_t count(std::size_t available) const noexcept;
};

/// All observed records followed by the first ceil(fraction * N) synthetic
/// records in manifest order.
DatasetManifest merge_datasets(const DatasetManifest& observed, const DatasetManifest& synthetic,
                               SyntheticFraction fraction);

}  // namespace srmix
