#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srmix/degradation.hpp"
#include "srmix/model.hpp"
#include "srmix/training.hpp"

namespace srmix {

inline constexpr int kConfigSchemaVersion = 1;

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "SRMIX_OUTPUT_ROOT";

struct DataConfig {
  std::filesystem::path train_hr;
  std::filesystem::path train_lr;
  std::filesystem::path val_hr;
  std::filesystem::path val_lr;
  std::filesystem::path extra_hr;
  /// Sub-image window and stride; 0 keeps whole images.
  int paired_crop = 200;
  int paired_stride = 100;
  int extra_crop = 480;
  int extra_stride = 240;
  /// Use only the first N prepared training sub-images (name order).
  std::optional<std::size_t> data_volume;
  bool operator==(const DataConfig&) const = default;
};

enum class SweepAxis { data_volume, model_size, synthetic_volume, degradation_type };

std::string_view to_string(SweepAxis axis) noexcept;
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepSpec {
  SweepAxis axis = SweepAxis::data_volume;
  std::vector<std::string> values;

  /// Non-empty, known tokens, strictly increasing where numeric.
  void validate() const;
  bool operator==(const SweepSpec&) const = default;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::vector<std::string> presets;
  std::filesystem::path output_dir;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  long checkpoint_every = 0;
  DegradationSpec degradation{DegradationKind::learned, 0.0, 0.0, 0.0, {}};
  SyntheticFraction synthetic_fraction = SyntheticFraction::of(0.0);
  std::optional<SweepSpec> sweep;

  /// Value checks only; Throws InvalidConfig.
  void validate() const;
};

/// Known preset names: baseline, mixup, synthesis, full (method toggles),
/// desk, full_scale (scale).
const std::vector<std::string>& preset_names();
/// Throws InvalidConfig for unknown names.
void apply_preset(ExperimentConfig& config, const std::string& name);

/// Defaults, then the file's presets, then the file's keys. Unknown sections
/// or keys, a missing or different schema_version, and malformed values throw
/// InvalidConfig. Relative paths resolve against the file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Same rules for in-memory text; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Writes a file that load_config reads back to an equal configuration.
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// --out flag, else config output_dir, else $SRMIX_OUTPUT_ROOT, else ./srmix_out.
std::filesystem::path resolve_output_root(const std::optional<std::filesystem::path>& flag,
                                          const ExperimentConfig& config);

}  // namespace srmix
