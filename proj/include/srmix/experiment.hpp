#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "srmix/config.hpp"
#include "srmix/degradation.hpp"
#include "srmix/manifest.hpp"
#include "srmix/metrics.hpp"
#include "srmix/plot.hpp"
#include "srmix/training.hpp"

namespace srmix {

/// File layout below an output root.
struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path prepared() const { return root / "prepared"; }
  std::filesystem::path train_manifest() const { return prepared() / "train.tsv"; }
  std::filesystem::path val_manifest() const { return prepared() / "val.tsv"; }
  std::filesystem::path extra_manifest() const { return prepared() / "extra.tsv"; }
  std::filesystem::path degradation_dir() const { return root / "degradation"; }
  std::filesystem::path degradation_weights() const { return degradation_dir() / "best.srw"; }
  std::filesystem::path synthetic_dir(DegradationKind kind) const;
  std::filesystem::path synthetic_manifest(DegradationKind kind) const { return synthetic_dir(kind) / "manifest.tsv"; }
  std::filesystem::path sr_dir(const std::string& run) const { return root / "sr" / run; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path sweep_dir(SweepAxis axis) const;
};

struct PrepareSummary {
  std::size_t train_images = 0;
  std::size_t train_subimages = 0;
  std::size_t val_images = 0;
  std::size_t extra_images = 0;
  std::size_t extra_subimages = 0;
};

/// Crops training pairs and extra HR images into sub-images, lists the
/// validation pairs, and writes the three manifests. Rewrites prepared/ from
/// scratch so reruns are idempotent.
PrepareSummary cmd_prepare(const ExperimentConfig& config, const OutputLayout& out, std::ostream& log);

struct TrainRunOutput {
  std::filesystem::path dir;
  TrainResult result;
};

/// Learns g on the prepared pairs; writes best.srw, final.srw and log.csv.
TrainRunOutput cmd_train_degradation(const ExperimentConfig& config, const OutputLayout& out,
                                     std::ostream& log);

/// Synthesizes LR for the prepared extra HR set with config.degradation
/// (learned weights default to the train-degradation output).
SyntheticSet cmd_synthesize(const ExperimentConfig& config, const OutputLayout& out, std::ostream& log);

/// Directory name for an SR run, derived from the method and model settings.
std::string sr_run_name(const ExperimentConfig& config);

/// Training set for SR: the prepared pairs (first data_volume of them) plus
/// the configured share of the synthetic set.
DatasetManifest sr_training_manifest(const ExperimentConfig& config, const OutputLayout& out);

/// Trains f; writes best.srw, final.srw, log.csv and config.ini under
/// `run_dir` (default sr/<sr_run_name>).
TrainRunOutput cmd_train_sr(const ExperimentConfig& config, const OutputLayout& out, std::ostream& log,
                            std::optional<std::filesystem::path> run_dir = std::nullopt);

struct EvaluateOutput {
  ValidationReport report;
  std::filesystem::path csv;
};

/// Scores weights on the prepared validation manifest and writes a CSV.
EvaluateOutput cmd_evaluate(const ExperimentConfig& config, const OutputLayout& out,
                            const std::filesystem::path& weights_path, bool use_self_ensemble,
                            std::ostream& log);

struct SweepOutput {
  std::vector<std::filesystem::path> logs;
  std::filesystem::path plot;
};

/// One SR run per sweep value, then an overlay plot. A failing point aborts
/// the sweep; logs of finished points stay on disk.
SweepOutput cmd_sweep(const ExperimentConfig& config, const SweepSpec& sweep, const OutputLayout& out,
                      std::ostream& log);

/// Overlay plot of the given logs.
PlotLayout cmd_plot(const std::vector<std::filesystem::path>& log_paths, const std::filesystem::path& out_path);

}  // namespace srmix
