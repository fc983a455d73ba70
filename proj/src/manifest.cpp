#include "srmix/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "srmix/error.hpp"

namespace srmix {

namespace fs = std::filesystem;

std::string_view to_string(Origin origin) noexcept {
  switch (origin) {
    case Origin::observed: return "observed";
    case Origin::synthetic: return "synthetic";
    case Origin::analytic: return "analytic";
  }
  return "observed";
}

std::string_view to_string(Split split) noexcept {
  return split == Split::train ? "train" : "val";
}

Origin parse_origin(std::string_view text) {
  if (text == "observed") return Origin::observed;
  if (text == "synthetic") return Origin::synthetic;
  if (text == "analytic") return Origin::analytic;
  throw Error(ErrorCode::MalformedManifest, "unknown origin '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  throw Error(ErrorCode::MalformedManifest, "unknown split '" + std::string(text) + "'");
}

void DatasetManifest::add(ManifestRecord record) {
  std::string key = record.hr_path.string() + '\t' + (record.lr_path ? record.lr_path->string() : "-");
  if (!keys_.insert(std::move(key)).second) {
    throw Error(ErrorCode::DuplicateRecord, record.hr_path.string());
  }
  records_.push_back(std::move(record));
}

bool DatasetManifest::paired() const noexcept {
  return std::all_of(records_.begin(), records_.end(),
                     [](const auto& r) { return r.lr_path.has_value(); });
}

void DatasetManifest::check_files() const {
  for (const auto& r : records_) {
    if (!fs::is_regular_file(r.hr_path)) throw Error(ErrorCode::FileNotFound, r.hr_path.string());
    if (r.lr_path && !fs::is_regular_file(*r.lr_path)) {
      throw Error(ErrorCode::FileNotFound, r.lr_path->string());
    }
  }
}

DatasetManifest DatasetManifest::head(std::size_t count) const {
  DatasetManifest out;
  for (std::size_t i = 0; i < std::min(count, size()); ++i) out.add(records_[i]);
  return out;
}

namespace {

std::map<std::string, fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::FileNotFound, dir.string());
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") files.emplace(entry.path().filename().string(), entry.path());
  }
  return files;
}

// Stored paths are relative to the manifest's directory, so an output tree
// can be moved or compared against another run.
std::string encode_path(const fs::path& p, const fs::path& base) {
  const fs::path from = base.empty() ? fs::current_path() : fs::absolute(base);
  const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(from.lexically_normal());
  return rel.empty() ? p.string() : rel.string();
}

fs::path decode_path(const std::string& text, const fs::path& base) {
  const fs::path p(text);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

DatasetManifest build_manifest(const fs::path& hr_dir, const std::optional<fs::path>& lr_dir,
                               Split split, Origin origin) {
  const auto hr_files = list_pngs(hr_dir);
  if (hr_files.empty()) throw Error(ErrorCode::EmptyDirectory, hr_dir.string());

  std::map<std::string, fs::path> lr_files;
  if (lr_dir) {
    lr_files = list_pngs(*lr_dir);
    for (const auto& [name, path] : lr_files) {
      if (!hr_files.contains(name)) {
        throw Error(ErrorCode::MissingCounterpart, "LR file " + path.string() + " has no HR twin");
      }
    }
  }

  DatasetManifest manifest;
  for (const auto& [name, hr_path] : hr_files) {
    ManifestRecord record{hr_path, std::nullopt, origin, split};
    if (lr_dir) {
      const auto it = lr_files.find(name);
      if (it == lr_files.end()) {
        throw Error(ErrorCode::MissingCounterpart,
                    "HR file " + hr_path.string() + " has no LR twin in " + lr_dir->string());
      }
      record.lr_path = it->second;
    }
    manifest.add(std::move(record));
  }
  return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const fs::path base = path.parent_path();
  for (const auto& r : manifest.records()) {
    out << encode_path(r.hr_path, base) << '\t' << (r.lr_path ? encode_path(*r.lr_path, base) : "-") << '\t'
        << to_string(r.origin) << '\t' << to_string(r.split) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) {
      throw Error(ErrorCode::MalformedManifest,
                  path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    ManifestRecord record;
    record.hr_path = decode_path(fields[0], path.parent_path());
    if (fields[1] != "-") record.lr_path = decode_path(fields[1], path.parent_path());
    record.origin = parse_origin(fields[2]);
    record.split = parse_split(fields[3]);
    manifest.add(std::move(record));
  }
  return manifest;
}

}  // namespace srmix
