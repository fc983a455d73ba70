#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace srmix {

enum class Origin { observed, synthetic, analytic };
enum class Split { train, val };

std::string_view to_string(Origin origin) noexcept;
std::string_view to_string(Split split) noexcept;
Origin parse_origin(std::string_view text);
Split parse_split(std::string_view text);

struct ManifestRecord {
  std::filesystem::path hr_path;
  std::optional<std::filesystem::path> lr_path;
  Origin origin = Origin::observed;
  Split split = Split::train;

  bool operator==(const ManifestRecord&) const = default;
};

/// Ordered list of dataset records. (hr_path, lr_path) pairs are unique.
class DatasetManifest {
 public:
  DatasetManifest() = default;

  /// Throws DuplicateRecord if the (hr, lr) pair is already present.
  void add(ManifestRecord record);

  const std::vector<ManifestRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const ManifestRecord& operator[](std::size_t i) const { return records_[i]; }

  /// True when every record carries an LR path.
  bool paired() const noexcept;

  /// Throws FileNotFound for the first record whose files are missing.
  void check_files() const;

  /// The first `count` records in manifest order (all when count >= size).
  DatasetManifest head(std::size_t count) const;

  bool operator==(const DatasetManifest& other) const { return records_ == other.records_; }

 private:
  std::vector<ManifestRecord> records_;
  std::unordered_set<std::string> keys_;
};

/// Enumerates *.png files in hr_dir (sorted by name). With lr_dir, every HR
/// file must have an identically named LR file and vice versa.
DatasetManifest build_manifest(const std::filesystem::path& hr_dir,
                               const std::optional<std::filesystem::path>& lr_dir, Split split,
                               Origin origin);

/// One record per line: hr_path \t lr_path-or-"-" \t origin \t split.
/// Paths are written relative to the manifest's directory and resolved
/// against it on read.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace srmix
