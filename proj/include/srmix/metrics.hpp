#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srmix/image.hpp"
#include "srmix/manifest.hpp"

namespace srmix {

/// PSNR in dB, or the "identical images" marker when the MSE is exactly 0.
class PsnrValue {
 public:
  static PsnrValue identical() noexcept { return PsnrValue(); }
  static PsnrValue decibels(double db) noexcept { return PsnrValue(db); }

  bool is_identical() const noexcept { return !db_.has_value(); }
  /// Throws std::bad_optional_access for the identical marker.
  double db() const { return db_.value(); }
  /// +inf for the identical marker; for ordering and plotting only.
  double as_double() const noexcept;
  std::string to_string() const;

  bool operator==(const PsnrValue&) const = default;

 private:
  PsnrValue() = default;
  explicit PsnrValue(double db) : db_(db) {}
  std::optional<double> db_;
};

double mean_squared_error(const ImageBuffer& a, const ImageBuffer& b);

/// 10 log10(1 / MSE) over all H*W*3 samples, peak value 1.0.
PsnrValue psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, valid-region windows only, averaged over RGB channels.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// size x size crop anchored at (floor((H-size)/2), floor((W-size)/2)), with
/// the size clamped to the image extent per axis.
ImageBuffer central_crop(const ImageBuffer& image, int size);

struct MetricRecord {
  std::string image_id;
  PsnrValue psnr_db = PsnrValue::identical();
  double ssim = 1.0;
};

struct ValidationReport {
  std::vector<MetricRecord> records;
  /// Identical marker when any record is identical (the mean is unbounded).
  PsnrValue mean_psnr = PsnrValue::identical();
  double mean_ssim = 0.0;
};

/// Maps an LR image to its restored counterpart (same dimensions).
using ImageModel = std::function<ImageBuffer(const ImageBuffer&)>;

/// Runs `model` on every record's full LR image, central-crops output and HR
/// to `crop`, and scores them. Records keep manifest order.
ValidationReport validate(const ImageModel& model, const DatasetManifest& manifest, int crop);

/// Same protocol on in-memory pairs; ids are the pair indices.
ValidationReport validate_pairs(const ImageModel& model, const std::vector<ImagePair>& pairs,
                                int crop);

ValidationReport summarize(std::vector<MetricRecord> records);

/// Averages t^-1(model(t(lr))) over the 8 dihedral transforms, clamped.
ImageBuffer self_ensemble(const ImageModel& model, const ImageBuffer& lr);

/// CSV with header image_id,psnr_db,ssim and a trailing MEAN row.
void write_metrics_csv(const std::filesystem::path& path, const ValidationReport& report);

}  // namespace srmix
