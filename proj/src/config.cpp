#include "wsiset/config.hpp"

#include "wsiset/error.hpp"
#include "wsiset/stats.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace wsiset {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(LabelPolicy policy) {
  switch (policy) {
    case LabelPolicy::Organ: return "organ";
    case LabelPolicy::Camelyon: return "camelyon";
    case LabelPolicy::Mask: return "mask";
  }
  return "organ";
}

LabelPolicy parse_label_policy(std::string_view name) {
  for (auto p : {LabelPolicy::Organ, LabelPolicy::Camelyon, LabelPolicy::Mask})
    if (to_string(p) == name) return p;
  throw Error(ErrorKind::InvalidConfig, "unknown label policy '" + std::string(name) + "'");
}

std::vector<std::string> CompileConfig::class_names() const {
  switch (label_policy) {
    case LabelPolicy::Camelyon: return {"normal", "tumor"};
    case LabelPolicy::Mask: return {"background", "stroma", "benign", "gleason3", "gleason4", "gleason5"};
    case LabelPolicy::Organ: break;
  }
  std::vector<std::string> names;
  for (const auto& c : classes) names.push_back(c.name);
  return names;
}

void CompileConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..")
    throw Error(ErrorKind::InvalidConfig, "dataset name must be a plain directory name");
  if (corpus.empty()) throw Error(ErrorKind::InvalidConfig, "corpus path is required");
  sampling.validate();
  split.validate();
  augment.validate();
  if (tissue.work_mpp <= 0.0 || tissue.min_component_px < 0)
    throw Error(ErrorKind::InvalidConfig, "tissue options out of range");
  if (jobs < 1) throw Error(ErrorKind::InvalidConfig, "jobs must be >= 1");
  if (annotation_tau < 0.0 || annotation_tau > 1.0) throw Error(ErrorKind::InvalidConfig, "annotation_tau in [0, 1]");
  if (label_policy == LabelPolicy::Organ) {
    if (classes.empty()) throw Error(ErrorKind::InvalidConfig, "organ label policy needs at least one class");
    std::set<std::string> names;
    std::set<std::string> organs;
    for (const auto& c : classes) {
      if (c.name.empty() || !names.insert(c.name).second)
        throw Error(ErrorKind::InvalidConfig, "class names must be unique and non-empty");
      if (c.organs.empty()) throw Error(ErrorKind::InvalidConfig, "class '" + c.name + "' lists no organs");
      for (const auto& o : c.organs)
        if (!organs.insert(o).second) throw Error(ErrorKind::InvalidConfig, "organ '" + o + "' mapped twice");
    }
  }
  if (rebalance && label_policy == LabelPolicy::Mask)
    throw Error(ErrorKind::InvalidConfig, "class rebalancing needs class labels");
}

void CompileConfig::apply_seed(std::uint64_t s) {
  seed = s;
  sampling.seed = s;
  split.seed = s;
}

CompileConfig preset_config(DatasetKind kind) {
  CompileConfig cfg;
  cfg.kind = kind;
  cfg.augment.mean = kPtcga200ReferenceMean;
  cfg.augment.std = kPtcga200ReferenceStd;
  cfg.augment.out_px = 224;
  switch (kind) {
    case DatasetKind::Ptcga200:
      cfg.name = "ptcga200";
      cfg.sampling.mode = SampleMode::Random;
      cfg.sampling.patches_per_slide = 500;
      cfg.sampling.scale_um = 200.0;
      cfg.sampling.out_px = 512;
      cfg.split.strategy = SplitStrategy::SlideLevel;
      // Slide proportions behind the published 4,945,500 / 107,500 / 57,000 patches.
      cfg.split.fractions = {9891.0 / 10220.0, 215.0 / 10220.0, 114.0 / 10220.0};
      cfg.label_policy = LabelPolicy::Organ;
      break;
    case DatasetKind::Pcam200:
      cfg.name = "pcam200";
      cfg.sampling.mode = SampleMode::Grid;
      cfg.sampling.scale_um = 200.0;
      cfg.sampling.stride_um = 100.0;
      cfg.sampling.out_px = 512;
      cfg.split.strategy = SplitStrategy::SourceConstrained;
      cfg.split.fractions = {28539.0 / 56703.0, 10490.0 / 56703.0, 17674.0 / 56703.0};
      cfg.label_policy = LabelPolicy::Camelyon;
      cfg.rebalance = true;
      cfg.augment.rrc_scale_min = 0.8;
      break;
    case DatasetKind::SegPanda200:
      cfg.name = "segpanda200";
      cfg.sampling.mode = SampleMode::Grid;
      cfg.sampling.scale_um = 400.0;
      cfg.sampling.stride_um = 200.0;
      cfg.sampling.out_px = 1024;
      cfg.split.strategy = SplitStrategy::StratifiedIsup;
      cfg.split.fractions = {70878.0 / 100960.0, 15042.0 / 100960.0, 15040.0 / 100960.0};
      cfg.label_policy = LabelPolicy::Mask;
      cfg.filters["provider"] = "radboud";
      cfg.augment.segmentation_mode = true;
      cfg.augment.seg_crop_px = 512;
      break;
    case DatasetKind::Other:
      cfg.name = "dataset";
      cfg.augment.mean = Eigen::Array3d::Constant(0.5);
      cfg.augment.std = Eigen::Array3d::Constant(0.5);
      break;
  }
  cfg.split.fractions[2] = 1.0 - cfg.split.fractions[0] - cfg.split.fractions[1];
  return cfg;
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::InvalidConfig, where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw Error(ErrorKind::InvalidConfig, "unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

Eigen::Array3d read3(const json& v) {
  if (!v.is_array() || v.size() != 3) throw Error(ErrorKind::InvalidConfig, "expected a 3-element array");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

void parse_augment(const json& a, AugmentConfig& cfg) {
  check_keys(a,
             {"out_px", "rrc_scale_min", "rrc_ratio", "jitter", "ssl_mode", "grayscale_p", "blur_sigma", "blur_p",
              "hflip_p", "vflip_p", "segmentation_mode", "seg_crop_px", "mean", "std", "ablate"},
             "augment");
  read(a, "out_px", cfg.out_px);
  read(a, "rrc_scale_min", cfg.rrc_scale_min);
  read(a, "rrc_ratio", cfg.rrc_ratio);
  if (a.contains("jitter")) {
    const auto& j = a.at("jitter");
    check_keys(j, {"brightness", "contrast", "saturation", "hue", "p"}, "augment.jitter");
    read(j, "brightness", cfg.jitter.brightness);
    read(j, "contrast", cfg.jitter.contrast);
    read(j, "saturation", cfg.jitter.saturation);
    read(j, "hue", cfg.jitter.hue);
    read(j, "p", cfg.jitter.p);
  }
  read(a, "ssl_mode", cfg.ssl_mode);
  read(a, "grayscale_p", cfg.grayscale_p);
  read(a, "blur_sigma", cfg.blur_sigma);
  read(a, "blur_p", cfg.blur_p);
  read(a, "hflip_p", cfg.hflip_p);
  read(a, "vflip_p", cfg.vflip_p);
  read(a, "segmentation_mode", cfg.segmentation_mode);
  read(a, "seg_crop_px", cfg.seg_crop_px);
  if (a.contains("mean")) cfg.mean = read3(a.at("mean"));
  if (a.contains("std")) cfg.std = read3(a.at("std"));
  if (a.contains("ablate")) {
    cfg.ablate.clear();
    for (const auto& op : a.at("ablate")) cfg.ablate.insert(op.get<std::string>());
  }
}

json augment_json(const AugmentConfig& a) {
  return {{"out_px", a.out_px},
          {"rrc_scale_min", a.rrc_scale_min},
          {"rrc_ratio", a.rrc_ratio},
          {"jitter",
           {{"brightness", a.jitter.brightness},
            {"contrast", a.jitter.contrast},
            {"saturation", a.jitter.saturation},
            {"hue", a.jitter.hue},
            {"p", a.jitter.p}}},
          {"ssl_mode", a.ssl_mode},
          {"grayscale_p", a.grayscale_p},
          {"blur_sigma", a.blur_sigma},
          {"blur_p", a.blur_p},
          {"hflip_p", a.hflip_p},
          {"vflip_p", a.vflip_p},
          {"segmentation_mode", a.segmentation_mode},
          {"seg_crop_px", a.seg_crop_px},
          {"mean", {a.mean[0], a.mean[1], a.mean[2]}},
          {"std", {a.std[0], a.std[1], a.std[2]}},
          {"ablate", std::vector<std::string>(a.ablate.begin(), a.ablate.end())}};
}

}  // namespace

CompileConfig parse_config(const json& doc, const fs::path& base_dir) {
  try {
    check_keys(doc,
               {"$schema", "preset", "name", "kind", "corpus", "out", "seed", "jobs", "emit_tissue_masks", "sampling",
                "tissue", "split", "labels", "filters", "rebalance", "augment"},
               "config");
    CompileConfig cfg = preset_config(parse_dataset_kind(doc.value("preset", std::string("other"))));
    if (doc.contains("kind")) cfg.kind = parse_dataset_kind(doc.at("kind").get<std::string>());
    read(doc, "name", cfg.name);
    if (doc.contains("corpus")) {
      const fs::path p = doc.at("corpus").get<std::string>();
      cfg.corpus = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (doc.contains("out")) {
      const fs::path p = doc.at("out").get<std::string>();
      cfg.out = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    read(doc, "jobs", cfg.jobs);
    read(doc, "emit_tissue_masks", cfg.emit_tissue_masks);
    read(doc, "rebalance", cfg.rebalance);
    if (doc.contains("sampling")) {
      const auto& s = doc.at("sampling");
      check_keys(s, {"mode", "patches_per_slide", "scale_um", "out_px", "stride_um", "tissue_tau", "max_attempts_factor"},
                 "sampling");
      if (s.contains("mode")) {
        const auto mode = s.at("mode").get<std::string>();
        if (mode != "random" && mode != "grid") throw Error(ErrorKind::InvalidConfig, "sampling.mode is random|grid");
        cfg.sampling.mode = mode == "random" ? SampleMode::Random : SampleMode::Grid;
      }
      read(s, "patches_per_slide", cfg.sampling.patches_per_slide);
      read(s, "scale_um", cfg.sampling.scale_um);
      read(s, "out_px", cfg.sampling.out_px);
      read(s, "stride_um", cfg.sampling.stride_um);
      read(s, "tissue_tau", cfg.sampling.tissue_tau);
      read(s, "max_attempts_factor", cfg.sampling.max_attempts_factor);
    }
    if (doc.contains("tissue")) {
      const auto& t = doc.at("tissue");
      check_keys(t, {"work_mpp", "min_component_px"}, "tissue");
      read(t, "work_mpp", cfg.tissue.work_mpp);
      read(t, "min_component_px", cfg.tissue.min_component_px);
    }
    if (doc.contains("split")) {
      const auto& s = doc.at("split");
      check_keys(s, {"strategy", "fractions"}, "split");
      if (s.contains("strategy")) cfg.split.strategy = parse_split_strategy(s.at("strategy").get<std::string>());
      read(s, "fractions", cfg.split.fractions);
    }
    if (doc.contains("labels")) {
      const auto& l = doc.at("labels");
      check_keys(l, {"policy", "classes", "annotation_tau"}, "labels");
      if (l.contains("policy")) cfg.label_policy = parse_label_policy(l.at("policy").get<std::string>());
      read(l, "annotation_tau", cfg.annotation_tau);
      if (l.contains("classes")) {
        cfg.classes.clear();
        for (const auto& c : l.at("classes")) {
          check_keys(c, {"name", "organs"}, "labels.classes[]");
          OrganClass oc;
          oc.name = c.at("name").get<std::string>();
          oc.organs = c.contains("organs") ? c.at("organs").get<std::vector<std::string>>()
                                           : std::vector<std::string>{oc.name};
          cfg.classes.push_back(std::move(oc));
        }
      }
    }
    if (doc.contains("filters")) cfg.filters = doc.at("filters").get<std::map<std::string, std::string>>();
    if (doc.contains("augment")) parse_augment(doc.at("augment"), cfg.augment);
    cfg.apply_seed(doc.value("seed", std::uint64_t{0}));
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
}

CompileConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json config_identity(const CompileConfig& cfg) {
  json classes = json::array();
  for (const auto& c : cfg.classes) classes.push_back({{"name", c.name}, {"organs", c.organs}});
  return {{"name", cfg.name},
          {"kind", to_string(cfg.kind)},
          {"seed", cfg.seed},
          {"sampling",
           {{"mode", cfg.sampling.mode == SampleMode::Random ? "random" : "grid"},
            {"patches_per_slide", cfg.sampling.patches_per_slide},
            {"scale_um", cfg.sampling.scale_um},
            {"out_px", cfg.sampling.out_px},
            {"stride_um", cfg.sampling.stride_um},
            {"tissue_tau", cfg.sampling.tissue_tau},
            {"max_attempts_factor", cfg.sampling.max_attempts_factor}}},
          {"tissue", {{"work_mpp", cfg.tissue.work_mpp}, {"min_component_px", cfg.tissue.min_component_px}}},
          {"split", {{"strategy", to_string(cfg.split.strategy)}, {"fractions", cfg.split.fractions}}},
          {"labels",
           {{"policy", to_string(cfg.label_policy)}, {"classes", classes}, {"annotation_tau", cfg.annotation_tau}}},
          {"filters", cfg.filters},
          {"rebalance", cfg.rebalance},
          {"augment", augment_json(cfg.augment)}};
}

std::string config_hash(const CompileConfig& cfg) { return sha256_hex(config_identity(cfg).dump()); }

namespace {

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw Error(ErrorKind::IoError, "SHA-256 unavailable");
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
  return h.hex();
}

}  // namespace wsiset
