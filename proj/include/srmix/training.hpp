#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "srmix/image.hpp"
#include "srmix/manifest.hpp"
#include "srmix/metrics.hpp"
#include "srmix/mixup.hpp"
#include "srmix/model.hpp"
#include "srmix/rng.hpp"
#include "srmix/tensor.hpp"

namespace srmix {

struct TrainConfig {
  int batch_size = 16;
  int patch_size = 128;
  long total_iters = 500000;
  double lr_init = 2e-4;
  long lr_half_every = 100000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  MixupConfig mixup;
  long validate_every = 1000;
  std::uint64_t seed = 0;
  /// Central crop edge used for validation PSNR/SSIM.
  int val_crop = 1000;

  /// Throws InvalidConfig. total_iters may be 0 (null run).
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

enum class Direction { sr, degradation };

std::string_view to_string(Direction direction) noexcept;

/// Parameters plus Adam moments. `iteration` counts completed steps.
template <typename T>
struct OptimizerState {
  std::vector<T> params;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  long iteration = 0;

  explicit OptimizerState(std::vector<T> initial = {})
      : params(std::move(initial)),
        first_moment(params.size(), T(0)),
        second_moment(params.size(), T(0)) {}
  bool operator==(const OptimizerState&) const = default;
};

struct TrainState {
  ModelWeights weights;
  std::vector<float> first_moment;
  std::vector<float> second_moment;
  long iteration = 0;
  /// +inf encodes an identical-image validation result.
  double best_val_psnr = -std::numeric_limits<double>::infinity();
  long best_iter = 0;
  bool operator==(const TrainState&) const = default;
};

struct TrainLogRow {
  long iteration = 0;
  double learning_rate = 0.0;
  /// Mean batch loss since the previous row (the batch loss itself at row 0).
  double train_loss = 0.0;
  PsnrValue val_psnr = PsnrValue::identical();
  double val_ssim = 0.0;
};

/// Compares PSNR by its printed form so NaN (no validation set) rows compare equal.
inline bool operator==(const TrainLogRow& a, const TrainLogRow& b) {
  return a.iteration == b.iteration && a.learning_rate == b.learning_rate &&
         a.train_loss == b.train_loss && a.val_psnr.to_string() == b.val_psnr.to_string() &&
         (a.val_ssim == b.val_ssim || (a.val_ssim != a.val_ssim && b.val_ssim != b.val_ssim));
}

struct TrainLog {
  std::vector<TrainLogRow> rows;
  bool operator==(const TrainLog&) const = default;
};

/// Mean absolute difference over every sample. Throws ShapeMismatch.
double l1_loss(std::span<const ImageBuffer> pred, std::span<const ImageBuffer> target);

/// Tensor form; when `grad` is non-null it receives dLoss/dpred.
template <typename T>
double l1_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad = nullptr);

/// lr_init * 0.5^floor(iteration / lr_half_every).
double lr_schedule(long iteration, const TrainConfig& config);

/// One bias-corrected Adam update. Throws ShapeMismatch or NonFiniteGradient
/// (state untouched in both cases).
template <typename T>
void adam_step(OptimizerState<T>& state, std::span<const T> gradients, double lr,
               const TrainConfig& config);

/// Decoded training pairs keyed by manifest position.
class ImageCache {
 public:
  const ImagePair& get(const DatasetManifest& manifest, std::size_t index);
  std::size_t size() const noexcept { return pairs_.size(); }

 private:
  std::map<std::string, std::shared_ptr<const ImagePair>> pairs_;
};

/// batch_size records drawn uniformly with replacement, each dihedrally
/// transformed, patch-cropped, then mixed per config.mixup.
std::vector<ImagePair> assemble_batch(const DatasetManifest& manifest, const TrainConfig& config,
                                      Rng& rng, ImageCache& cache);

struct TrainHooks {
  /// Called after each log row is appended.
  std::function<void(const TrainLogRow&)> on_row;
  /// Called every checkpoint_every steps (0 disables) with the current weights.
  std::function<void(long iteration, const ModelWeights&)> on_checkpoint;
  long checkpoint_every = 0;
};

struct TrainResult {
  ModelWeights best;
  ModelWeights final;
  TrainLog log;
  TrainState state;
  std::size_t patches_consumed = 0;
};

/// Optimizes the network on train_manifest. With Direction::degradation each
/// pair is used as (input = hr, target = lr). Validation runs at iteration 0
/// and every validate_every steps; `best` is the weights with the highest
/// validation PSNR (the final weights when there is no validation set).
TrainResult train(const DatasetManifest& train_manifest, const DatasetManifest& val_manifest,
                  const ModelConfig& model_config, const TrainConfig& config,
                  Direction direction = Direction::sr, const TrainHooks& hooks = {});

/// Same as train() but starting from the given weights.
TrainResult train_from(const ModelWeights& initial, const DatasetManifest& train_manifest,
                       const DatasetManifest& val_manifest, const TrainConfig& config,
                       Direction direction = Direction::sr, const TrainHooks& hooks = {});

/// Writes the header and rows to `path`.
void write_train_log(const std::filesystem::path& path, const TrainLog& log);
/// Appends one row, writing the header first when the file is new or empty.
void append_train_log_row(const std::filesystem::path& path, const TrainLogRow& row);
/// Throws MalformedLog.
TrainLog read_train_log(const std::filesystem::path& path);

}  // namespace srmix
