#include "srmix/experiment.hpp"

#include <cstdio>
#include <memory>
#include <ostream>

#include "srmix/augment.hpp"
#include "srmix/error.hpp"
#include "srmix/model.hpp"
#include "srmix/png_io.hpp"
#include "srmix/weights_io.hpp"

namespace srmix {

std::filesystem::path OutputLayout::synthetic_dir(DegradationKind kind) const {
  return root / "synthetic" / std::string(to_string(kind));
}

std::filesystem::path OutputLayout::sweep_dir(SweepAxis axis) const {
  return root / "sweep" / std::string(to_string(axis));
}

namespace {

void require_dir(const std::filesystem::path& dir, const char* key) {
  if (dir.empty()) throw Error(ErrorCode::InvalidConfig, std::string("data.") + key + " is not set");
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::FileNotFound, std::string("data.") + key + " directory " + dir.string());
  }
}

DatasetManifest require_manifest(const std::filesystem::path& path, const std::string& hint) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::EmptyDataset, "manifest " + path.string() + " does not exist (" + hint + ")");
  }
  return read_manifest(path);
}

std::string subimage_name(const std::filesystem::path& source, std::size_t index, bool cropped) {
  if (!cropped) return source.stem().string() + ".png";
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%04zu.png", index);
  return source.stem().string() + buf;
}

std::vector<ImageBuffer> windows(const ImageBuffer& image, int crop, int stride) {
  if (crop == 0) return {image};
  return crop_subimages(image, crop, stride);
}

std::string short_hash(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return std::string(buf).substr(0, 8);
}

std::string config_hash(const ModelConfig& model, const TrainConfig& train) {
  return short_hash(model.describe() + "|" + std::to_string(train.batch_size) + "|" +
                    std::to_string(train.patch_size) + "|" + std::to_string(train.total_iters) + "|" +
                    std::to_string(train.lr_init) + "|" + std::to_string(train.lr_half_every) + "|" +
                    std::to_string(train.mixup.enabled) + "|" + std::to_string(train.mixup.alpha) + "|" +
                    std::to_string(train.seed));
}

TrainHooks file_hooks(const std::filesystem::path& dir, const ExperimentConfig& config, std::ostream& log) {
  const std::filesystem::path log_path = dir / "log.csv";
  std::filesystem::remove(log_path);
  std::filesystem::remove_all(dir / "checkpoints");
  TrainHooks hooks;
  hooks.on_row = [log_path, &log](const TrainLogRow& row) {
    append_train_log_row(log_path, row);
    log << "  iter " << row.iteration << "  lr " << row.learning_rate << "  loss " << row.train_loss
        << "  val PSNR " << row.val_psnr.to_string() << "  SSIM " << row.val_ssim << '\n';
    log.flush();
  };
  hooks.checkpoint_every = config.checkpoint_every;
  const std::string hash = config_hash(config.model, config.train);
  hooks.on_checkpoint = [dir, hash](long iteration, const ModelWeights& weights) {
    char name[64];
    std::snprintf(name, sizeof name, "ckpt_%08ld_%s.srw", iteration, hash.c_str());
    save_weights(dir / "checkpoints" / name, weights);
  };
  return hooks;
}

void save_run(const std::filesystem::path& dir, const TrainResult& result, std::ostream& log) {
  save_weights(dir / "best.srw", result.best);
  save_weights(dir / "final.srw", result.final);
  log << "  best val PSNR " << result.state.best_val_psnr << " dB at iteration " << result.state.best_iter
      << "; weights in " << dir.string() << '\n';
}

}  // namespace

PrepareSummary cmd_prepare(const ExperimentConfig& config, const OutputLayout& out, std::ostream& log) {
  const DataConfig& data = config.data;
  require_dir(data.train_hr, "train_hr");
  require_dir(data.train_lr, "train_lr");
  require_dir(data.val_hr, "val_hr");
  require_dir(data.val_lr, "val_lr");
  if (!data.extra_hr.empty()) require_dir(data.extra_hr, "extra_hr");

  PrepareSummary summary;
  std::filesystem::remove_all(out.prepared());
  const auto train_hr_dir = out.prepared() / "train" / "hr";
  const auto train_lr_dir = out.prepared() / "train" / "lr";
  std::filesystem::create_directories(train_hr_dir);
  std::filesystem::create_directories(train_lr_dir);

  const DatasetManifest raw_train = build_manifest(data.train_hr, data.train_lr, Split::train, Origin::observed);
  summary.train_images = raw_train.size();
  for (const ManifestRecord& record : raw_train.records()) {
    ImagePair pair{load_image(*record.lr_path), load_image(record.hr_path)};
    check_pair(pair);
    const auto hr_tiles = windows(pair.hr, data.paired_crop, data.paired_stride);
    const auto lr_tiles = windows(pair.lr, data.paired_crop, data.paired_stride);
    if (hr_tiles.empty()) {
      log << "warning: " << record.hr_path.string() << " is smaller than the crop size; skipped\n";
    }
    for (std::size_t i = 0; i < hr_tiles.size(); ++i) {
      const std::string name = subimage_name(record.hr_path, i, data.paired_crop > 0);
      save_image(train_hr_dir / name, hr_tiles[i], 8);
      save_image(train_lr_dir / name, lr_tiles[i], 8);
    }
  }
  const DatasetManifest train = build_manifest(train_hr_dir, train_lr_dir, Split::train, Origin::observed);
  summary.train_subimages = train.size();
  write_manifest(out.train_manifest(), train);

  const DatasetManifest val = build_manifest(data.val_hr, data.val_lr, Split::val, Origin::observed);
  summary.val_images = val.size();
  write_manifest(out.val_manifest(), val);

  DatasetManifest extra;
  if (!data.extra_hr.empty()) {
    const auto extra_dir = out.prepared() / "extra" / "hr";
    std::filesystem::create_directories(extra_dir);
    const DatasetManifest raw_extra = build_manifest(data.extra_hr, std::nullopt, Split::train, Origin::observed);
    summary.extra_images = raw_extra.size();
    for (const ManifestRecord& record : raw_extra.records()) {
      const auto tiles = windows(load_image(record.hr_path), data.extra_crop, data.extra_stride);
      for (std::size_t i = 0; i < tiles.size(); ++i) {
        save_image(extra_dir / subimage_name(record.hr_path, i, data.extra_crop > 0), tiles[i], 8);
      }
    }
    if (summary.extra_images > 0) {
      extra = build_manifest(extra_dir, std::nullopt, Split::train, Origin::observed);
    }
  }
  summary.extra_subimages = extra.size();
  write_manifest(out.extra_manifest(), extra);

  log << "prepared " << summary.train_subimages << " paired sub-images from " << summary.train_images
      << " training images, " << summary.val_images << " validation pairs, " << summary.extra_subimages
      << " extra HR sub-images from " << summary.extra_images << " images\n";
  return summary;
}

TrainRunOutput cmd_train_degradation(const ExperimentConfig& config, const OutputLayout& out, std::ostream& log) {
  const DatasetManifest train = require_manifest(out.train_manifest(), "run prepare first");
  const DatasetManifest val = require_manifest(out.val_manifest(), "run prepare first");
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "no prepared training pairs");
  const auto dir = out.degradation_dir();
  std::filesystem::create_directories(dir);
  log << "training the degradation network on " << train.size() << " pairs (" << config.model.describe()
      << ", " << config.train.total_iters << " iterations)\n";
  TrainRunOutput result{dir, train_degradation(train, val, config.model, config.train, file_hooks(dir, config, log))};
  save_run(dir, result.result, log);
  return result;
}

SyntheticSet cmd_synthesize(const ExperimentConfig& config, const OutputLayout& out, std::ostream& log) {
  const DatasetManifest extra = require_manifest(out.extra_manifest(), "run prepare first");
  DegradationSpec spec = config.degradation;
  const auto dir = out.synthetic_dir(spec.kind);
  std::filesystem::remove_all(dir);

  ImageModel model;
  std::string checksum = "-";
  if (spec.kind == DegradationKind::learned) {
    if (spec.weights_path.empty()) spec.weights_path = out.degradation_weights();
    auto weights = std::make_shared<const ModelWeights>(load_weights(spec.weights_path));
    checksum = weights_checksum(*weights);
    model = [weights](const ImageBuffer& hr) { return unet_forward(hr, *weights); };
  } else {
    auto counter = std::make_shared<std::uint64_t>(0);
    const Rng base = Rng(config.train.seed).derive("synthesis");
    model = [spec, base, counter](const ImageBuffer& hr) {
      Rng rng = base.derive((*counter)++);
      return apply_analytic_degradation(spec, hr, rng);
    };
  }
  if (extra.empty()) log << "warning: the extra HR manifest is empty; nothing to synthesize\n";
  SyntheticSet set = synthesize_lr(model, extra, dir / "lr", spec, checksum);
  write_manifest(out.synthetic_manifest(spec.kind), set.manifest);
  log << "synthesized " << set.manifest.size() << " LR images with " << to_string(spec.kind) << " into "
      << dir.string() << '\n';
  return set;
}

std::string sr_run_name(const ExperimentConfig& config) {
  std::string name = config.train.mixup.enabled ? "mixup" : "nomix";
  const bool synthesis = config.synthetic_fraction.all || config.synthetic_fraction.value > 0.0;
  name += "_syn-" + config.synthetic_fraction.to_string();
  if (synthesis) name += "-" + std::string(to_string(config.degradation.kind));
  name += "_" + config.model.describe();
  name += "_n" + (config.data.data_volume ? std::to_string(*config.data.data_volume) : std::string("all"));
  name += "_s" + std::to_string(config.train.seed);
  return name;
}

DatasetManifest sr_training_manifest(const ExperimentConfig& config, const OutputLayout& out) {
  DatasetManifest observed = require_manifest(out.train_manifest(), "run prepare first");
  if (config.data.data_volume) observed = observed.head(*config.data.data_volume);
  const bool synthesis = config.synthetic_fraction.all || config.synthetic_fraction.value > 0.0;
  if (!synthesis) return observed;
  const DatasetManifest synthetic =
      require_manifest(out.synthetic_manifest(config.degradation.kind), "run synthesize first");
  return merge_datasets(observed, synthetic, config.synthetic_fraction);
}

TrainRunOutput cmd_train_sr(const ExperimentConfig& config, const OutputLayout& out, std::ostream& log,
                            std::optional<std::filesystem::path> run_dir) {
  const DatasetManifest pairs = sr_training_manifest(config, out);
  const DatasetManifest val = require_manifest(out.val_manifest(), "run prepare first");
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no training pairs");
  const auto dir = run_dir.value_or(out.sr_dir(sr_run_name(config)));
  std::filesystem::create_directories(dir);
  save_config(dir / "config.ini", config);
  log << "training SR network in " << dir.string() << " on " << pairs.size() << " pairs (mixup "
      << (config.train.mixup.enabled ? "on" : "off") << ", synthetic " << config.synthetic_fraction.to_string()
      << ")\n";
  TrainRunOutput result{dir, train(pairs, val, config.model, config.train, Direction::sr, file_hooks(dir, config, log))};
  save_run(dir, result.result, log);
  return result;
}

EvaluateOutput cmd_evaluate(const ExperimentConfig& config, const OutputLayout& out,
                            const std::filesystem::path& weights_path, bool use_self_ensemble, std::ostream& log) {
  const DatasetManifest val = require_manifest(out.val_manifest(), "run prepare first");
  auto weights = std::make_shared<const ModelWeights>(load_weights(weights_path));
  ImageModel model = [weights](const ImageBuffer& lr) { return unet_forward(lr, *weights); };
  if (use_self_ensemble) {
    model = [inner = model](const ImageBuffer& lr) { return self_ensemble(inner, lr); };
  }
  EvaluateOutput result;
  result.report = validate(model, val, config.train.val_crop);
  std::string stem = weights_path.parent_path().filename().string();
  stem += (stem.empty() ? "" : "_") + weights_path.stem().string();
  if (use_self_ensemble) stem += "_se";
  result.csv = out.eval_dir() / (stem + ".csv");
  write_metrics_csv(result.csv, result.report);
  log << "evaluated " << val.size() << " images" << (use_self_ensemble ? " with self-ensemble" : "")
      << ": PSNR " << result.report.mean_psnr.to_string()
      << (result.report.mean_psnr.is_identical() ? " (IdenticalImages)" : " dB") << ", SSIM "
      << result.report.mean_ssim << "; per-image CSV " << result.csv.string() << '\n';
  return result;
}

namespace {

DegradationSpec sweep_degradation(const ExperimentConfig& config, const std::string& value) {
  DegradationSpec spec;
  const DegradationSpec& base = config.degradation;
  if (value == "gaussian") {
    spec.kind = DegradationKind::gaussian_noise;
    spec.sigma = base.kind == DegradationKind::gaussian_noise ? base.sigma : 25.0 / 255.0;
  } else if (value == "bicubic") {
    spec.kind = DegradationKind::bicubic_x4;
  } else if (value == "bicubic_noise") {
    spec.kind = DegradationKind::bicubic_x4_plus_noise;
    const bool own = base.kind == DegradationKind::bicubic_x4_plus_noise;
    spec.sigma_read = own ? base.sigma_read : 0.01;
    spec.sigma_shot = own ? base.sigma_shot : 0.04;
  } else {
    spec.kind = DegradationKind::learned;
    spec.weights_path = base.kind == DegradationKind::learned ? base.weights_path : std::filesystem::path{};
  }
  return spec;
}

}  // namespace

SweepOutput cmd_sweep(const ExperimentConfig& config, const SweepSpec& sweep, const OutputLayout& out,
                      std::ostream& log) {
  sweep.validate();
  SweepOutput result;
  std::vector<PlotSeries> series;
  const auto root = out.sweep_dir(sweep.axis);
  for (const std::string& value : sweep.values) {
    ExperimentConfig point = config;
    point.sweep.reset();
    switch (sweep.axis) {
      case SweepAxis::data_volume:
        if (value == "all") {
          point.data.data_volume.reset();
        } else {
          point.data.data_volume = static_cast<std::size_t>(std::stoul(value));
        }
        break;
      case SweepAxis::model_size:
        point.model.base_channels = std::stoi(value);
        point.model.validate();
        break;
      case SweepAxis::synthetic_volume:
        point.synthetic_fraction = value == "half" ? SyntheticFraction::of(0.5) : SyntheticFraction::parse(value);
        break;
      case SweepAxis::degradation_type:
        point.degradation = sweep_degradation(config, value);
        point.synthetic_fraction = SyntheticFraction::everything();
        break;
    }
    const bool synthesis = point.synthetic_fraction.all || point.synthetic_fraction.value > 0.0;
    if (synthesis && (sweep.axis == SweepAxis::degradation_type ||
                      !std::filesystem::exists(out.synthetic_manifest(point.degradation.kind)))) {
      cmd_synthesize(point, out, log);
    }
    log << "sweep " << to_string(sweep.axis) << " = " << value << '\n';
    const auto dir = root / value;
    const TrainRunOutput run = cmd_train_sr(point, out, log, dir);
    result.logs.push_back(dir / "log.csv");
    series.push_back({std::string(to_string(sweep.axis)) + "=" + value, run.result.log});
  }
  result.plot = root / "val_psnr.svg";
  plot_convergence(series, result.plot, "validation PSNR, sweep over " + std::string(to_string(sweep.axis)));
  log << "sweep plot written to " << result.plot.string() << '\n';
  return result;
}

PlotLayout cmd_plot(const std::vector<std::filesystem::path>& log_paths, const std::filesystem::path& out_path) {
  return plot_convergence(load_series(log_paths), out_path);
}

}  // namespace srmix
