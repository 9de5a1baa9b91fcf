#pragma once

#include "wsiset/augment.hpp"
#include "wsiset/record.hpp"
#include "wsiset/stats.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace wsiset {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestFile = "manifest.jsonl";

/// A patch record plus the files it produced. Paths are relative to the
/// manifest's directory.
struct ManifestRecord {
  PatchRecord record;
  std::string path;
  std::string sha256;
  std::string mask_sha256;  ///< segmentation datasets only
};

struct SplitSummary {
  std::uint64_t records = 0;
  std::uint64_t slides = 0;
  std::map<std::string, std::uint64_t> classes;  ///< by class name; empty for segmentation

  bool operator==(const SplitSummary&) const = default;
};

/// Complete description of a compiled dataset. Serialized as one JSON header
/// line followed by one JSON line per record.
struct DatasetManifest {
  std::string name;
  DatasetKind kind = DatasetKind::Other;
  double scale_um = 0.0;
  int out_px = 0;
  double mpp = 0.0;
  bool segmentation = false;
  bool rebalanced = false;
  double tissue_tau = 0.0;
  std::vector<std::string> class_names;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string config_hash;
  nlohmann::json config;  ///< dataset-defining config fields
  std::map<std::string, SplitSummary> summary;  ///< keyed by split name
  std::optional<ChannelStats> pixel_stats;       ///< over the train split
  std::optional<ChannelStats> image_mean_stats;  ///< per-image-mean variant
  std::uint64_t stats_pixels = 0;
  std::vector<std::string> warnings;
  std::vector<ManifestRecord> records;
};

/// Per-split counts recomputed from the record rows.
std::map<std::string, SplitSummary> recount(const std::vector<ManifestRecord>& records,
                                            const std::vector<std::string>& class_names);

nlohmann::json header_json(const DatasetManifest& m);
nlohmann::json record_json(const ManifestRecord& r);
ManifestRecord record_from_json(const nlohmann::json& j);

/// Serializes to `path` through a temporary file and an atomic rename.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Flat CSV export of the record rows.
void write_manifest_csv(std::ostream& out, const DatasetManifest& m);

}  // namespace wsiset
