#include "srmix/degradation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "srmix/error.hpp"
#include "srmix/png_io.hpp"

namespace srmix {

double cubic_kernel(double x) noexcept {
  const double ax = std::abs(x);
  if (ax <= 1.0) return (1.5 * ax - 2.5) * ax * ax + 1.0;
  if (ax < 2.0) return ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0;
  return 0.0;
}

namespace {

struct Contribution {
  std::vector<int> index;
  std::vector<double> weight;
};

// Per output coordinate, the clamped source indices and normalised weights.
std::vector<Contribution> contributions(int in_size, int out_size) {
  const double scale = static_cast<double>(out_size) / in_size;
  const double stretch = scale < 1.0 ? scale : 1.0;
  const double support = 2.0 / stretch;
  std::vector<Contribution> table(out_size);
  for (int u = 0; u < out_size; ++u) {
    const double center = (u + 0.5) / scale - 0.5;
    const int first = static_cast<int>(std::floor(center - support));
    const int last = static_cast<int>(std::ceil(center + support));
    Contribution& c = table[u];
    double sum = 0.0;
    for (int j = first; j <= last; ++j) {
      const double w = stretch * cubic_kernel(stretch * (center - j));
      if (w == 0.0) continue;
      c.index.push_back(std::clamp(j, 0, in_size - 1));
      c.weight.push_back(w);
      sum += w;
    }
    for (double& w : c.weight) w /= sum;
  }
  return table;
}

}  // namespace

ImageBuffer bicubic_resize(const ImageBuffer& image, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) {
    throw Error(ErrorCode::InvalidDimensions, "resize target must be at least 1x1");
  }
  const int h = image.height();
  const int w = image.width();
  const auto cols = contributions(w, out_width);
  const auto rows = contributions(h, out_height);

  // horizontal pass: h x out_width
  std::vector<double> tmp(static_cast<std::size_t>(h) * out_width * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Contribution& c = cols[x];
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (std::size_t k = 0; k < c.index.size(); ++k) acc += c.weight[k] * image.at(y, c.index[k], ch);
        tmp[(static_cast<std::size_t>(y) * out_width + x) * 3 + ch] = acc;
      }
    }
  }
  ImageBuffer out(out_height, out_width);
  for (int y = 0; y < out_height; ++y) {
    const Contribution& r = rows[y];
    for (int x = 0; x < out_width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (std::size_t k = 0; k < r.index.size(); ++k) {
          acc += r.weight[k] * tmp[(static_cast<std::size_t>(r.index[k]) * out_width + x) * 3 + ch];
        }
        out.at(y, x, ch) = static_cast<float>(acc);
      }
    }
  }
  out.clamp();
  return out;
}

ImageBuffer bicubic_degrade(const ImageBuffer& hr, int factor) {
  if (factor < 1 || hr.height() % factor != 0 || hr.width() % factor != 0) {
    throw Error(ErrorCode::NotDivisible, std::to_string(hr.height()) + "x" +
                                             std::to_string(hr.width()) +
                                             " is not divisible by " + std::to_string(factor));
  }
  const ImageBuffer small = bicubic_resize(hr, hr.height() / factor, hr.width() / factor);
  return bicubic_resize(small, hr.height(), hr.width());
}

namespace {

void check_sigma(double sigma, const char* name) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::NegativeSigma, std::string(name) + " must be >= 0");
  }
}

}  // namespace

ImageBuffer add_gaussian_noise(const ImageBuffer& image, double sigma, Rng& rng) {
  check_sigma(sigma, "sigma");
  ImageBuffer out = image;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (float& v : out.samples()) v = static_cast<float>(v + normal(rng));
  out.clamp();
  return out;
}

ImageBuffer add_signal_dependent_noise(const ImageBuffer& image, double sigma_read,
                                       double sigma_shot, Rng& rng) {
  check_sigma(sigma_read, "sigma_read");
  check_sigma(sigma_shot, "sigma_shot");
  ImageBuffer out = image;
  if (sigma_read == 0.0 && sigma_shot == 0.0) return out;
  std::normal_distribution<double> normal(0.0, 1.0);
  const double read2 = sigma_read * sigma_read;
  const double shot2 = sigma_shot * sigma_shot;
  for (float& v : out.samples()) {
    const double sd = std::sqrt(read2 + shot2 * std::max(0.0f, v));
    v = static_cast<float>(v + sd * normal(rng));
  }
  out.clamp();
  return out;
}

std::string_view to_string(DegradationKind kind) noexcept {
  switch (kind) {
    case DegradationKind::bicubic_x4: return "bicubic_x4";
    case DegradationKind::gaussian_noise: return "gaussian_noise";
    case DegradationKind::bicubic_x4_plus_noise: return "bicubic_x4_plus_noise";
    case DegradationKind::learned: return "learned";
  }
  return "bicubic_x4";
}

DegradationKind parse_degradation_kind(std::string_view text) {
  if (text == "bicubic_x4" || text == "bicubic") return DegradationKind::bicubic_x4;
  if (text == "gaussian_noise" || text == "gaussian") return DegradationKind::gaussian_noise;
  if (text == "bicubic_x4_plus_noise") return DegradationKind::bicubic_x4_plus_noise;
  if (text == "learned") return DegradationKind::learned;
  throw Error(ErrorCode::InvalidConfig, "unknown degradation kind '" + std::string(text) + "'");
}

void DegradationSpec::validate() const {
  const bool gaussian = kind == DegradationKind::gaussian_noise;
  const bool signal = kind == DegradationKind::bicubic_x4_plus_noise;
  if (!gaussian && sigma != 0.0) throw Error(ErrorCode::InvalidConfig, "sigma only applies to gaussian_noise");
  if (!signal && (sigma_read != 0.0 || sigma_shot != 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "sigma_read/sigma_shot only apply to bicubic_x4_plus_noise");
  }
  if (gaussian) check_sigma(sigma, "sigma");
  if (signal) {
    check_sigma(sigma_read, "sigma_read");
    check_sigma(sigma_shot, "sigma_shot");
  }
  const bool learned = kind == DegradationKind::learned;
  if (learned != !weights_path.empty()) {
    throw Error(ErrorCode::InvalidConfig, "weights_path is required exactly for the learned kind");
  }
}

ImageBuffer apply_analytic_degradation(const DegradationSpec& spec, const ImageBuffer& hr, Rng& rng) {
  spec.validate();
  switch (spec.kind) {
    case DegradationKind::bicubic_x4: return bicubic_degrade(hr, 4);
    case DegradationKind::gaussian_noise: return add_gaussian_noise(hr, spec.sigma, rng);
    case DegradationKind::bicubic_x4_plus_noise:
      return add_signal_dependent_noise(bicubic_degrade(hr, 4), spec.sigma_read, spec.sigma_shot, rng);
    case DegradationKind::learned: break;
  }
  throw Error(ErrorCode::InvalidConfig, "learned degradation needs a model");
}

TrainResult train_degradation(const DatasetManifest& paired, const DatasetManifest& val,
                              const ModelConfig& model_config, const TrainConfig& config,
                              const TrainHooks& hooks) {
  if (paired.empty()) throw Error(ErrorCode::EmptyDataset, "no observed pairs to learn the degradation from");
  return train(paired, val, model_config, config, Direction::degradation, hooks);
}

SyntheticSet synthesize_lr(const ImageModel& degrade, const DatasetManifest& hr_manifest,
                           const std::filesystem::path& out_dir, const DegradationSpec& spec,
                           const std::string& weights_checksum) {
  std::filesystem::create_directories(out_dir);
  SyntheticSet set{DatasetManifest{}, spec};
  std::set<std::string> used;
  for (std::size_t i = 0; i < hr_manifest.size(); ++i) {
    const ManifestRecord& record = hr_manifest[i];
    const ImageBuffer hr = load_image(record.hr_path);
    if (hr.height() % 4 != 0 || hr.width() % 4 != 0) {
      throw Error(ErrorCode::NotDivisible, record.hr_path.string() + " is not divisible by 4");
    }
    ImageBuffer lr = degrade(hr);
    if (!lr.same_shape(hr)) {
      throw Error(ErrorCode::DimensionMismatch, "degrader changed the size of " + record.hr_path.string());
    }
    lr.clamp();
    std::string name = record.hr_path.stem().string();
    if (!used.insert(name).second) name += "_" + std::to_string(i);
    const std::filesystem::path lr_path = out_dir / (name + ".png");
    save_image(lr_path, lr, 8);
    set.manifest.add({record.hr_path, lr_path, Origin::synthetic, Split::train});
  }

  // Relative to out_dir, like the manifest paths.
  std::string weights_ref = "-";
  if (!spec.weights_path.empty()) {
    const auto rel = std::filesystem::absolute(spec.weights_path)
                         .lexically_normal()
                         .lexically_relative(std::filesystem::absolute(out_dir).lexically_normal());
    weights_ref = (rel.empty() ? spec.weights_path : rel).string();
  }
  std::ofstream sidecar(out_dir / "degradation.txt", std::ios::trunc);
  if (!sidecar) throw Error(ErrorCode::IoError, "cannot write degradation sidecar in " + out_dir.string());
  sidecar << std::setprecision(17) << "kind=" << to_string(spec.kind) << '\n'
          << "sigma=" << spec.sigma << '\n'
          << "sigma_read=" << spec.sigma_read << '\n'
          << "sigma_shot=" << spec.sigma_shot << '\n'
          << "weights=" << weights_ref << '\n'
          << "weights_checksum=" << weights_checksum << '\n'
          << "records=" << set.manifest.size() << '\n';
  return set;
}

SyntheticFraction SyntheticFraction::of(double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "synthetic fraction must be in [0,1] or 'all'");
  }
  return {false, fraction};
}

SyntheticFraction SyntheticFraction::parse(std::string_view text) {
  if (text == "all") return everything();
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(text), &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return of(v);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidConfig, "bad synthetic fraction '" + std::string(text) + "'");
  }
}

std::string SyntheticFraction::to_string() const {
  if (all) return "all";
  std::ostringstream out;
  out << value;
  return out.str();
}

std::size_t SyntheticFraction::count(std::size_t available) const noexcept {
  if (all) return available;
  // tolerance keeps e.g. 0.3 * 10 from rounding up to 4
  const double exact = value * static_cast<double>(available);
  const auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  return std::min(n, available);
}

DatasetManifest merge_datasets(const DatasetManifest& observed, const DatasetManifest& synthetic,
                               SyntheticFraction fraction) {
  DatasetManifest merged = observed;
  const std::size_t take = fraction.count(synthetic.size());
  for (std::size_t i = 0; i < take; ++i) merged.add(synthetic[i]);
  return merged;
}

}  // namespace srmix
