#include "srmix/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "srmix/augment.hpp"
#include "srmix/error.hpp"
#include "srmix/png_io.hpp"

namespace srmix {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (patch_size < 4 || patch_size % ModelConfig::kInternalScale != 0) {
    fail("patch_size must be a positive multiple of 4");
  }
  if (total_iters < 0) fail("total_iters must be >= 0");
  if (!(lr_init > 0.0) || !std::isfinite(lr_init)) fail("lr_init must be > 0");
  if (lr_half_every < 1) fail("lr_half_every must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must be in [0,1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must be in [0,1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
  if (!(mixup.alpha > 0.0)) fail("mixup alpha must be > 0");
  if (validate_every < 1) fail("validate_every must be >= 1");
  if (val_crop < 11) fail("val_crop must be >= 11 (SSIM window)");
}

std::string_view to_string(Direction direction) noexcept {
  return direction == Direction::sr ? "sr" : "degradation";
}

double l1_loss(std::span<const ImageBuffer> pred, std::span<const ImageBuffer> target) {
  if (pred.size() != target.size()) {
    throw Error(ErrorCode::ShapeMismatch, "batch sizes differ");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i].same_shape(target[i])) {
      throw Error(ErrorCode::ShapeMismatch, "batch element " + std::to_string(i) + " differs in shape");
    }
    const auto a = pred[i].samples();
    const auto b = target[i].samples();
    for (std::size_t k = 0; k < a.size(); ++k) sum += std::abs(static_cast<double>(a[k]) - b[k]);
    count += a.size();
  }
  if (count == 0) throw Error(ErrorCode::EmptyDataset, "empty batch");
  return sum / static_cast<double>(count);
}

template <typename T>
double l1_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad) {
  if (!pred.same_shape(target)) throw Error(ErrorCode::ShapeMismatch, "prediction and target differ in shape");
  const std::size_t n = pred.data.size();
  if (n == 0) throw Error(ErrorCode::EmptyDataset, "empty batch");
  if (grad) *grad = pred.zeros_like();
  const T step = T(1) / static_cast<T>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred.data[i] - target.data[i];
    sum += std::abs(static_cast<double>(d));
    if (grad) grad->data[i] = d > T(0) ? step : (d < T(0) ? -step : T(0));
  }
  return sum / static_cast<double>(n);
}

double lr_schedule(long iteration, const TrainConfig& config) {
  if (iteration < 0) throw Error(ErrorCode::InvalidConfig, "iteration must be >= 0");
  return config.lr_init * std::pow(0.5, static_cast<double>(iteration / config.lr_half_every));
}

template <typename T>
void adam_step(OptimizerState<T>& state, std::span<const T> gradients, double lr,
               const TrainConfig& config) {
  const std::size_t n = state.params.size();
  if (gradients.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "gradient/moment sizes do not match the parameters");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(gradients[i]))) {
      throw Error(ErrorCode::NonFiniteGradient,
                  "gradient " + std::to_string(i) + " is " + std::to_string(gradients[i]) +
                      " at step " + std::to_string(state.iteration));
    }
  }
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const long t = state.iteration + 1;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gradients[i];
    const double m = b1 * state.first_moment[i] + (1.0 - b1) * g;
    const double v = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
    state.first_moment[i] = static_cast<T>(m);
    state.second_moment[i] = static_cast<T>(v);
    const double update = lr * (m / correction1) / (std::sqrt(v / correction2) + config.adam_eps);
    state.params[i] = static_cast<T>(state.params[i] - update);
  }
  state.iteration = t;
}

const ImagePair& ImageCache::get(const DatasetManifest& manifest, std::size_t index) {
  const ManifestRecord& record = manifest[index];
  if (!record.lr_path) {
    throw Error(ErrorCode::MissingCounterpart, "training record has no LR image: " + record.hr_path.string());
  }
  const std::string key = record.hr_path.string() + '\t' + record.lr_path->string();
  auto it = pairs_.find(key);
  if (it == pairs_.end()) {
    auto pair = std::make_shared<ImagePair>(ImagePair{load_image(*record.lr_path), load_image(record.hr_path)});
    check_pair(*pair);
    it = pairs_.emplace(key, std::move(pair)).first;
  }
  return *it->second;
}

std::vector<ImagePair> assemble_batch(const DatasetManifest& manifest, const TrainConfig& config,
                                      Rng& rng, ImageCache& cache) {
  if (manifest.empty()) throw Error(ErrorCode::EmptyDataset, "training manifest is empty");
  Rng patch_rng = rng.derive("patch");
  Rng mixup_rng = rng.derive("mixup");
  std::uniform_int_distribution<std::size_t> pick(0, manifest.size() - 1);
  std::uniform_int_distribution<int> transform(0, kDihedralCount - 1);
  std::vector<ImagePair> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  for (int k = 0; k < config.batch_size; ++k) {
    const ImagePair& source = cache.get(manifest, pick(patch_rng));
    const int id = transform(patch_rng);
    const ImagePair turned{dihedral_transform(source.lr, id), dihedral_transform(source.hr, id)};
    batch.push_back(random_patch(turned, config.patch_size, patch_rng));
  }
  return mixup_batch(batch, config.mixup, mixup_rng);
}

namespace {

std::vector<ImagePair> load_pairs(const DatasetManifest& manifest, Direction direction) {
  std::vector<ImagePair> pairs;
  pairs.reserve(manifest.size());
  ImageCache cache;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    ImagePair pair = cache.get(manifest, i);
    if (direction == Direction::degradation) std::swap(pair.lr, pair.hr);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace

TrainResult train(const DatasetManifest& train_manifest, const DatasetManifest& val_manifest,
                  const ModelConfig& model_config, const TrainConfig& config, Direction direction,
                  const TrainHooks& hooks) {
  model_config.validate();
  Rng init_rng = Rng(config.seed).derive("init");
  return train_from(init_weights(model_config, init_rng), train_manifest, val_manifest, config,
                    direction, hooks);
}

TrainResult train_from(const ModelWeights& initial, const DatasetManifest& train_manifest,
                       const DatasetManifest& val_manifest, const TrainConfig& config,
                       Direction direction, const TrainHooks& hooks) {
  config.validate();
  initial.config.validate();
  if (train_manifest.empty()) throw Error(ErrorCode::EmptyDataset, "training manifest is empty");

  const ModelConfig& model_config = initial.config;
  const UNet<float> net(model_config);
  if (initial.values.size() != net.layout().parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, "initial weights do not match the model configuration");
  }

  TrainResult result{initial, initial, TrainLog{}, TrainState{initial, {}, {}, 0}, 0};
  OptimizerState<float> opt(initial.values);
  auto sync_state = [&] {
    result.state.weights.values = opt.params;
    result.state.first_moment = opt.first_moment;
    result.state.second_moment = opt.second_moment;
    result.state.iteration = opt.iteration;
  };
  if (config.total_iters == 0) {
    sync_state();
    return result;
  }

  const std::vector<ImagePair> val_pairs = load_pairs(val_manifest, direction);
  const Rng batch_root = Rng(config.seed).derive("batch");
  ImageCache cache;

  auto make_batch = [&](long iteration) {
    Rng rng = batch_root.derive(static_cast<std::uint64_t>(iteration));
    std::vector<ImagePair> batch = assemble_batch(train_manifest, config, rng, cache);
    if (direction == Direction::degradation) {
      for (ImagePair& p : batch) std::swap(p.lr, p.hr);
    }
    std::vector<ImageBuffer> inputs;
    std::vector<ImageBuffer> targets;
    inputs.reserve(batch.size());
    targets.reserve(batch.size());
    for (ImagePair& p : batch) {
      inputs.push_back(std::move(p.lr));
      targets.push_back(std::move(p.hr));
    }
    return std::pair{images_to_tensor<float>(inputs), images_to_tensor<float>(targets)};
  };

  auto add_row = [&](long iteration, double loss) {
    TrainLogRow row{iteration, lr_schedule(iteration, config), loss,
                    PsnrValue::decibels(std::numeric_limits<double>::quiet_NaN()),
                    std::numeric_limits<double>::quiet_NaN()};
    if (!val_pairs.empty()) {
      const std::span<const float> params(opt.params);
      const ImageModel model = [&](const ImageBuffer& x) { return unet_forward(x, model_config, params); };
      const ValidationReport report = validate_pairs(model, val_pairs, config.val_crop);
      row.val_psnr = report.mean_psnr;
      row.val_ssim = report.mean_ssim;
      if (row.val_psnr.as_double() > result.state.best_val_psnr) {
        result.state.best_val_psnr = row.val_psnr.as_double();
        result.state.best_iter = iteration;
        result.best.values = opt.params;
      }
    }
    result.log.rows.push_back(row);
    if (hooks.on_row) hooks.on_row(row);
  };

  {
    const auto [input, target] = make_batch(0);
    add_row(0, l1_loss(net.forward(opt.params, input), target));
  }

  std::vector<float> grads(opt.params.size());
  double window_loss = 0.0;
  long window_count = 0;
  for (long it = 0; it < config.total_iters; ++it) {
    const auto [input, target] = make_batch(it);
    ForwardCache<float> fc;
    const Tensor<float> output = net.forward(opt.params, input, &fc);
    Tensor<float> grad_output;
    const double loss = l1_loss(output, target, &grad_output);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "loss is " + std::to_string(loss) + " at iteration " +
                                                std::to_string(it));
    }
    std::fill(grads.begin(), grads.end(), 0.0f);
    net.backward(opt.params, fc, grad_output, grads);
    adam_step<float>(opt, grads, lr_schedule(it, config), config);
    result.patches_consumed += static_cast<std::size_t>(config.batch_size);
    window_loss += loss;
    ++window_count;

    const long done = it + 1;
    if (done % config.validate_every == 0) {
      add_row(done, window_loss / static_cast<double>(window_count));
      window_loss = 0.0;
      window_count = 0;
    }
    if (hooks.checkpoint_every > 0 && hooks.on_checkpoint && done % hooks.checkpoint_every == 0) {
      hooks.on_checkpoint(done, ModelWeights{model_config, opt.params});
    }
  }

  sync_state();
  result.final.values = opt.params;
  if (val_pairs.empty()) {
    result.best = result.final;
    result.state.best_iter = opt.iteration;
  }
  return result;
}

namespace {

constexpr const char* kLogHeader = "iteration,learning_rate,train_loss,val_psnr,val_ssim";

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_row(const TrainLogRow& row) {
  const std::string psnr =
      row.val_psnr.is_identical() ? "inf" : format_double(row.val_psnr.db());
  return std::to_string(row.iteration) + ',' + format_double(row.learning_rate) + ',' +
         format_double(row.train_loss) + ',' + psnr + ',' + format_double(row.val_ssim);
}

double parse_double(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::MalformedLog,
              path.string() + ":" + std::to_string(line) + ": bad number '" + text + "'");
}

}  // namespace

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << kLogHeader << '\n';
  for (const TrainLogRow& row : log.rows) out << format_row(row) << '\n';
}

void append_train_log_row(const std::filesystem::path& path, const TrainLogRow& row) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (fresh && path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
  if (fresh) out << kLogHeader << '\n';
  out << format_row(row) << '\n';
}

TrainLog read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::string line;
  if (!std::getline(in, line) || line != kLogHeader) {
    throw Error(ErrorCode::MalformedLog, path.string() + ": missing or wrong header");
  }
  TrainLog log;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      throw Error(ErrorCode::MalformedLog, path.string() + ":" + std::to_string(number) +
                                               ": expected 5 fields");
    }
    TrainLogRow row;
    const double iteration = parse_double(fields[0], path, number);
    if (iteration < 0 || iteration != std::floor(iteration)) {
      throw Error(ErrorCode::MalformedLog, path.string() + ":" + std::to_string(number) + ": bad iteration");
    }
    row.iteration = static_cast<long>(iteration);
    if (!log.rows.empty() && row.iteration <= log.rows.back().iteration) {
      throw Error(ErrorCode::MalformedLog, path.string() + ":" + std::to_string(number) +
                                               ": iterations must increase");
    }
    row.learning_rate = parse_double(fields[1], path, number);
    row.train_loss = parse_double(fields[2], path, number);
    row.val_psnr = fields[3] == "inf" ? PsnrValue::identical()
                                      : PsnrValue::decibels(parse_double(fields[3], path, number));
    row.val_ssim = parse_double(fields[4], path, number);
    log.rows.push_back(row);
  }
  return log;
}

template double l1_loss<float>(const Tensor<float>&, const Tensor<float>&, Tensor<float>*);
template double l1_loss<double>(const Tensor<double>&, const Tensor<double>&, Tensor<double>*);
template void adam_step<float>(OptimizerState<float>&, std::span<const float>, double, const TrainConfig&);
template void adam_step<double>(OptimizerState<double>&, std::span<const double>, double, const TrainConfig&);

}  // namespace srmix
