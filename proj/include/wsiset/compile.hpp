#pragma once

#include "wsiset/config.hpp"
#include "wsiset/manifest.hpp"
#include "wsiset/slide.hpp"
#include "wsiset/split.hpp"

#include <filesystem>
#include <vector>

namespace wsiset {

/// Every slide below `corpus` (directories holding slide.json, searched
/// recursively but not inside another slide), sorted by slide id.
std::vector<Slide> open_corpus(const std::filesystem::path& corpus);

bool passes_filters(const Slide& slide, const std::map<std::string, std::string>& filters);

/// Slides the config would enroll, after metadata filters and class mapping.
struct Enrollment {
  std::vector<Slide> slides;
  std::vector<std::string> warnings;
};
Enrollment enroll(const CompileConfig& cfg);

/// Split assignment the config would produce for its corpus.
SplitResult plan_splits(const CompileConfig& cfg, const std::vector<Slide>& slides);

struct CompileResult {
  DatasetManifest manifest;
  std::filesystem::path dataset_dir;
  std::filesystem::path manifest_path;
};

/// Builds `{out}/{name}`: patches as `{split}/{class}/{slide}_{i}.png`
/// (segmentation: `{split}/{slide}_{i}.png` plus `_mask.png`), statistics over
/// the train split, and manifest.jsonl written last. Output is independent of
/// `jobs`. On failure the dataset directory is removed. An existing dataset
/// directory is replaced only when `overwrite` is set.
CompileResult compile(const CompileConfig& cfg, bool overwrite = false);

}  // namespace wsiset
