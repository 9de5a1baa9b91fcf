#include "wsiset/sampler.hpp"

#include "wsiset/error.hpp"
#include "wsiset/patch.hpp"
#include "wsiset/resample.hpp"
#include "wsiset/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace wsiset {
namespace fs = std::filesystem;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: break;
  }
  return "unassigned";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  if (name == "unassigned") return Split::Unassigned;
  throw Error(ErrorKind::InvalidConfig, "unknown split '" + std::string(name) + "'");
}

void SampleSpec::validate() const {
  if (!(scale_um > 0.0)) throw Error(ErrorKind::InvalidConfig, "scale_um must be positive");
  if (out_px < 1) throw Error(ErrorKind::InvalidConfig, "out_px must be positive");
  if (tissue_tau < 0.0 || tissue_tau > 1.0) throw Error(ErrorKind::InvalidConfig, "tissue_tau must lie in [0, 1]");
  if (mode == SampleMode::Random) {
    if (patches_per_slide < 1) throw Error(ErrorKind::InvalidConfig, "patches_per_slide must be >= 1");
    if (max_attempts_factor < 1) throw Error(ErrorKind::InvalidConfig, "max_attempts_factor must be >= 1");
  } else if (!(stride_um > 0.0) || stride_um > scale_um) {
    throw Error(ErrorKind::InvalidConfig, "grid stride must satisfy 0 < stride <= scale");
  }
}

int grid_count(double extent_um, double scale_um, double stride_um) {
  if (extent_um + 1e-9 * scale_um < scale_um) return 0;
  return static_cast<int>(std::floor((extent_um - scale_um) / stride_um + 1e-9)) + 1;
}

namespace {

PatchRecord make_record(const Slide& slide, const SampleSpec& spec, int index, double x, double y, double fraction) {
  PatchRecord r;
  r.slide_id = slide.id;
  r.index = index;
  r.x0_um = x;
  r.y0_um = y;
  r.scale_um = spec.scale_um;
  r.out_px = spec.out_px;
  r.tissue_fraction = fraction;
  for (auto key : kRecordMetadataKeys)
    if (auto it = slide.metadata.find(std::string(key)); it != slide.metadata.end()) r.metadata.insert(*it);
  return r;
}

}  // namespace

std::vector<PatchRecord> random_patches(const Slide& slide, const TissueMask& mask, const SampleSpec& spec) {
  spec.validate();
  const double span_x = slide.width_um() - spec.scale_um;
  const double span_y = slide.height_um() - spec.scale_um;
  if (span_x < 0.0 || span_y < 0.0)
    throw Error(ErrorKind::InsufficientTissue, slide.id + ": slide smaller than one patch");
  Stream rng(derive_key(spec.seed, slide.id));
  std::vector<PatchRecord> out;
  out.reserve(static_cast<std::size_t>(spec.patches_per_slide));
  const long long budget = static_cast<long long>(spec.patches_per_slide) * spec.max_attempts_factor;
  long long rejected = 0;
  while (static_cast<int>(out.size()) < spec.patches_per_slide) {
    const double x = rng.uniform() * span_x;
    const double y = rng.uniform() * span_y;
    const double f = tissue_fraction(mask, {x, y, spec.scale_um, spec.scale_um});
    if (f >= spec.tissue_tau) {
      out.push_back(make_record(slide, spec, static_cast<int>(out.size()), x, y, f));
    } else if (++rejected >= budget) {
      throw Error(ErrorKind::InsufficientTissue,
                  slide.id + ": " + std::to_string(rejected) + " draws rejected below tissue threshold");
    }
  }
  return out;
}

std::vector<PatchRecord> grid_patches(const Slide& slide, const TissueMask& mask, const SampleSpec& spec) {
  spec.validate();
  const int nx = grid_count(slide.width_um(), spec.scale_um, spec.stride_um);
  const int ny = grid_count(slide.height_um(), spec.scale_um, spec.stride_um);
  std::vector<PatchRecord> out;
  int index = 0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = i * spec.stride_um;
      const double y = j * spec.stride_um;
      const double f = tissue_fraction(mask, {x, y, spec.scale_um, spec.scale_um});
      if (f >= spec.tissue_tau) out.push_back(make_record(slide, spec, index, x, y, f));
      ++index;
    }
  }
  return out;
}

bool PolygonAnnotation::contains(double x, double y) const {
  bool inside = false;
  for (const auto& ring : rings_) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const auto& a = ring[i];
      const auto& b = ring[j];
      if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) inside = !inside;
    }
  }
  return inside;
}

double PolygonAnnotation::coverage(const PhysicalRect& sq) const {
  constexpr int kLattice = 64;
  int hits = 0;
  for (int j = 0; j < kLattice; ++j)
    for (int i = 0; i < kLattice; ++i)
      hits += contains(sq.x + (i + 0.5) * sq.w / kLattice, sq.y + (j + 0.5) * sq.h / kLattice);
  return static_cast<double>(hits) / (kLattice * kLattice);
}

double MaskAnnotation::coverage(const PhysicalRect& sq) const {
  // Resolve the mask at ~1/64 of the square so large patches stay cheap.
  const LevelChoice choice = level_for_mpp(slide_, sq.w / 64.0);
  const PyramidLevel& lv = slide_.level(choice.level);
  const auto pixels = slide_.reader->level_pixels(choice.level);
  return coverage_fraction(*pixels, lv.mpp, slide_.width_um(), slide_.height_um(), sq);
}

std::shared_ptr<const Annotation> load_annotation(const fs::path& path) {
  if (fs::is_directory(path)) return std::make_shared<MaskAnnotation>(open_slide(path.string()));
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingAnnotation, "cannot read annotation " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    std::vector<PolygonAnnotation::Ring> rings;
    for (const auto& poly : doc.at("polygons")) {
      PolygonAnnotation::Ring ring;
      for (const auto& pt : poly) ring.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
      if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
      if (ring.size() < 3) throw Error(ErrorKind::CorruptMetadata, path.string() + ": ring with fewer than 3 points");
      rings.push_back(std::move(ring));
    }
    return std::make_shared<PolygonAnnotation>(std::move(rings));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptMetadata, path.string() + ": " + e.what());
  }
}

CamelyonLabel assign_label_camelyon(const PatchRecord& record, const Slide& slide, const Annotation* annotation,
                                    double annotation_tau) {
  const std::string type = slide.meta("slide_type");
  if (type == "normal") return CamelyonLabel::Normal;
  if (type != "tumor") throw Error(ErrorKind::CorruptMetadata, slide.id + ": slide_type must be tumor or normal");
  if (!annotation) throw Error(ErrorKind::MissingAnnotation, slide.id + ": tumor slide without annotation");
  const double c = annotation->coverage({record.x0_um, record.y0_um, record.scale_um, record.scale_um});
  return c >= annotation_tau ? CamelyonLabel::Tumor : CamelyonLabel::Reject;
}

MaskPatch co_crop_mask(const Slide& mask_slide, const PatchRecord& record) {
  const PatchWindow w = plan_patch(mask_slide, record.x0_um, record.y0_um, record.scale_um, record.out_px);
  const Raster8 region = read_region(mask_slide, w.level, w.x, w.y, w.extent, w.extent);
  if (region.channels != 1) throw Error(ErrorKind::ChannelMismatch, mask_slide.id + ": mask must be single-channel");
  if ((region.data > std::uint8_t(kMaxMaskLabel)).any())
    throw Error(ErrorKind::IllegalLabel, mask_slide.id + ": mask value outside 0.." + std::to_string(kMaxMaskLabel));
  MaskPatch out;
  out.mask = nearest_resize(region, record.out_px, record.out_px);
  for (Eigen::Index i = 0; i < out.mask.data.size(); ++i) ++out.histogram[out.mask.data[i]];
  return out;
}

std::vector<PatchRecord> tiny_subset(const std::vector<PatchRecord>& records, const std::vector<std::string>& organs,
                                     int slides_per_organ, int patches_per_slide, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_slide;
  std::map<std::string, std::vector<std::string>> slides_of_organ;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& idx = by_slide[records[i].slide_id];
    if (idx.empty()) {
      const auto it = records[i].metadata.find("organ");
      if (it != records[i].metadata.end()) slides_of_organ[it->second].push_back(records[i].slide_id);
    }
    idx.push_back(i);
  }
  std::vector<PatchRecord> out;
  for (const auto& organ : organs) {
    auto slides = slides_of_organ[organ];
    if (static_cast<int>(slides.size()) < slides_per_organ)
      throw Error(ErrorKind::InsufficientSlides, organ + ": " + std::to_string(slides.size()) + " slides, " +
                                                     std::to_string(slides_per_organ) + " requested");
    std::sort(slides.begin(), slides.end());
    Stream organ_rng(derive_key(seed, "tiny/organ/" + organ));
    organ_rng.shuffle(slides);
    slides.resize(static_cast<std::size_t>(slides_per_organ));
    std::sort(slides.begin(), slides.end());
    for (const auto& id : slides) {
      auto idx = by_slide[id];
      if (static_cast<int>(idx.size()) < patches_per_slide)
        throw Error(ErrorKind::InsufficientSlides, id + ": fewer than " + std::to_string(patches_per_slide) + " patches");
      Stream slide_rng(derive_key(seed, "tiny/slide/" + id));
      slide_rng.shuffle(idx);
      idx.resize(static_cast<std::size_t>(patches_per_slide));
      std::sort(idx.begin(), idx.end());
      for (auto i : idx) out.push_back(records[i]);
    }
  }
  return out;
}

}  // namespace wsiset
