#include "srmix/metrics.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "srmix/augment.hpp"
#include "srmix/error.hpp"
#include "srmix/png_io.hpp"

namespace srmix {

double PsnrValue::as_double() const noexcept {
  return db_ ? *db_ : std::numeric_limits<double>::infinity();
}

std::string PsnrValue::to_string() const {
  if (!db_) return "inf";
  std::ostringstream out;
  out << std::setprecision(10) << *db_;
  return out.str();
}

namespace {

void check_same_shape(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b) || a.empty()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                    std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable valid-mode filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::array<double, kWindow>& taps) {
  const int oh = h - kWindow + 1;
  const int ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double mean_squared_error(const ImageBuffer& a, const ImageBuffer& b) {
  check_same_shape(a, b);
  const auto sa = a.samples();
  const auto sb = b.samples();
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = static_cast<double>(sa[i]) - sb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(sa.size());
}

PsnrValue psnr(const ImageBuffer& a, const ImageBuffer& b) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return PsnrValue::identical();
  return PsnrValue::decibels(10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  check_same_shape(a, b);
  const int h = a.height();
  const int w = a.width();
  if (h < kWindow || w < kWindow) {
    throw Error(ErrorCode::ImageTooSmall, "SSIM needs at least 11x11 pixels");
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  static const auto taps = gaussian_taps();

  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const double va = a.samples()[i * 3 + c];
      const double vb = b.samples()[i * 3 + c];
      pa[i] = va;
      pb[i] = vb;
      aa[i] = va * va;
      bb[i] = vb * vb;
      ab[i] = va * vb;
    }
    const auto mu_a = filter_valid(pa, h, w, taps);
    const auto mu_b = filter_valid(pb, h, w, taps);
    const auto s_aa = filter_valid(aa, h, w, taps);
    const auto s_bb = filter_valid(bb, h, w, taps);
    const auto s_ab = filter_valid(ab, h, w, taps);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i];
      const double mb = mu_b[i];
      const double var_a = s_aa[i] - ma * ma;
      const double var_b = s_bb[i] - mb * mb;
      const double cov = s_ab[i] - ma * mb;
      acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / 3.0;
}

ImageBuffer central_crop(const ImageBuffer& image, int size) {
  const int ch = std::min(size, image.height());
  const int cw = std::min(size, image.width());
  if (ch == image.height() && cw == image.width()) return image;
  return crop(image, (image.height() - ch) / 2, (image.width() - cw) / 2, ch, cw);
}

ValidationReport summarize(std::vector<MetricRecord> records) {
  ValidationReport report;
  report.records = std::move(records);
  if (report.records.empty()) {
    report.mean_psnr = PsnrValue::decibels(std::numeric_limits<double>::quiet_NaN());
    report.mean_ssim = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  bool any_identical = false;
  for (const auto& r : report.records) {
    if (r.psnr_db.is_identical()) {
      any_identical = true;
    } else {
      psnr_sum += r.psnr_db.db();
    }
    ssim_sum += r.ssim;
  }
  const double count = static_cast<double>(report.records.size());
  report.mean_psnr =
      any_identical ? PsnrValue::identical() : PsnrValue::decibels(psnr_sum / count);
  report.mean_ssim = ssim_sum / count;
  return report;
}

namespace {

MetricRecord score(const ImageModel& model, const ImageBuffer& lr, const ImageBuffer& hr, int crop,
                   std::string id) {
  check_pair({lr, hr});
  ImageBuffer restored = model(lr);
  const ImageBuffer out_crop = central_crop(restored, crop);
  const ImageBuffer hr_crop = central_crop(hr, crop);
  return {std::move(id), psnr(out_crop, hr_crop), ssim(out_crop, hr_crop)};
}

}  // namespace

ValidationReport validate(const ImageModel& model, const DatasetManifest& manifest, int crop) {
  std::vector<MetricRecord> records;
  records.reserve(manifest.size());
  for (const auto& r : manifest.records()) {
    if (!r.lr_path) {
      throw Error(ErrorCode::MissingCounterpart, "validation record without LR: " + r.hr_path.string());
    }
    records.push_back(score(model, load_image(*r.lr_path), load_image(r.hr_path), crop,
                            r.hr_path.stem().string()));
  }
  return summarize(std::move(records));
}

ValidationReport validate_pairs(const ImageModel& model, const std::vector<ImagePair>& pairs,
                                int crop) {
  std::vector<MetricRecord> records;
  records.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    records.push_back(score(model, pairs[i].lr, pairs[i].hr, crop, std::to_string(i)));
  }
  return summarize(std::move(records));
}

ImageBuffer self_ensemble(const ImageModel& model, const ImageBuffer& lr) {
  std::vector<double> acc(lr.size(), 0.0);
  for (int t = 0; t < kDihedralCount; ++t) {
    const ImageBuffer branch =
        dihedral_transform(model(dihedral_transform(lr, t)), inverse_transform(t));
    if (!branch.same_shape(lr)) {
      throw Error(ErrorCode::ShapeMismatch, "model changed the image dimensions");
    }
    const auto s = branch.samples();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s[i];
  }
  ImageBuffer out(lr.height(), lr.width());
  auto dst = out.samples();
  for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i] / kDihedralCount);
  out.clamp();
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const ValidationReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "image_id,psnr_db,ssim\n" << std::setprecision(10);
  for (const auto& r : report.records) {
    out << r.image_id << ',' << r.psnr_db.to_string() << ',' << r.ssim << '\n';
  }
  out << "MEAN," << report.mean_psnr.to_string() << ',' << report.mean_ssim << '\n';
}

}  // namespace srmix
