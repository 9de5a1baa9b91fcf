#pragma once

#include "wsiset/augment.hpp"
#include "wsiset/sampler.hpp"
#include "wsiset/split.hpp"
#include "wsiset/tissue.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace wsiset {

enum class LabelPolicy {
  Organ,     ///< class from the slide's organ through a class-merge map
  Camelyon,  ///< tumor/normal from slide type and annotation
  Mask,      ///< segmentation: co-cropped label mask
};

std::string_view to_string(LabelPolicy policy);
LabelPolicy parse_label_policy(std::string_view name);

/// One output class and the organ values merged into it.
struct OrganClass {
  std::string name;
  std::vector<std::string> organs;
};

struct CompileConfig {
  std::filesystem::path corpus;
  std::string name;
  DatasetKind kind = DatasetKind::Other;
  SampleSpec sampling;
  TissueOptions tissue;
  SplitPlan split;
  LabelPolicy label_policy = LabelPolicy::Organ;
  std::vector<OrganClass> classes;
  double annotation_tau = 1.0;
  std::map<std::string, std::string> filters;  ///< metadata key == value predicates
  bool rebalance = false;
  AugmentConfig augment;
  std::uint64_t seed = 0;

  // Run options; not part of the dataset identity.
  std::filesystem::path out;
  int jobs = 1;
  bool emit_tissue_masks = false;

  std::vector<std::string> class_names() const;
  /// Schema-level checks, performed before any I/O.
  void validate() const;
  /// Propagates `seed` to the sampling and split plans.
  void apply_seed(std::uint64_t s);
};

/// Preset defaults for the three dataset kinds; Other gives plain defaults.
CompileConfig preset_config(DatasetKind kind);

/// Parses a config document. A "preset" key seeds defaults that the remaining
/// keys override. Relative corpus/out paths resolve against `base_dir`.
CompileConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
CompileConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the dataset-defining fields (run options excluded).
nlohmann::json config_identity(const CompileConfig& cfg);

/// SHA-256 hex digest of config_identity().dump().
std::string config_hash(const CompileConfig& cfg);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace wsiset
