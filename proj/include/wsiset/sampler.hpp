#pragma once

#include "wsiset/record.hpp"
#include "wsiset/slide.hpp"
#include "wsiset/tissue.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <vector>

namespace wsiset {

enum class SampleMode { Random, Grid };

struct SampleSpec {
  SampleMode mode = SampleMode::Random;
  int patches_per_slide = 500;
  double scale_um = 200.0;
  int out_px = 512;
  double stride_um = 100.0;
  double tissue_tau = 0.5;
  std::uint64_t seed = 0;
  int max_attempts_factor = 20;

  /// Throws InvalidConfig on any violated invariant.
  void validate() const;
};

/// Per-axis candidate count of a grid: floor((extent - scale) / stride) + 1,
/// or 0 when the patch does not fit.
int grid_count(double extent_um, double scale_um, double stride_um);

/// Uniform top-left draws over the eligible area, rejected below tissue_tau.
/// The draw sequence depends only on (seed, slide id). Throws
/// InsufficientTissue after patches_per_slide * max_attempts_factor rejections.
std::vector<PatchRecord> random_patches(const Slide& slide, const TissueMask& mask, const SampleSpec& spec);

/// Row-major grid at stride_um steps keeping candidates with tissue >= tau.
std::vector<PatchRecord> grid_patches(const Slide& slide, const TissueMask& mask, const SampleSpec& spec);

/// Annotated region in level-0 microns.
class Annotation {
 public:
  virtual ~Annotation() = default;
  /// Fraction of `square` inside the annotated region.
  virtual double coverage(const PhysicalRect& square) const = 0;
};

/// Closed rings with even-odd fill; coverage is estimated on a 64x64 lattice
/// of sample points at cell centers.
class PolygonAnnotation final : public Annotation {
 public:
  using Ring = std::vector<std::array<double, 2>>;
  explicit PolygonAnnotation(std::vector<Ring> rings) : rings_(std::move(rings)) {}

  bool contains(double x, double y) const;
  double coverage(const PhysicalRect& square) const override;
  const std::vector<Ring>& rings() const { return rings_; }

 private:
  std::vector<Ring> rings_;
};

/// Nonzero pixels of an aligned mask pyramid mark the annotated region.
class MaskAnnotation final : public Annotation {
 public:
  explicit MaskAnnotation(Slide mask_slide) : slide_(std::move(mask_slide)) {}
  double coverage(const PhysicalRect& square) const override;

 private:
  Slide slide_;
};

/// Loads a polygon JSON ({"polygons": [[[x, y], ...], ...]}) or a mask pyramid.
std::shared_ptr<const Annotation> load_annotation(const std::filesystem::path& path);

enum class CamelyonLabel { Tumor, Normal, Reject };

/// Tumor slides: tumor when coverage >= annotation_tau, else reject. Normal
/// slides: always normal. Throws MissingAnnotation for a tumor slide without
/// an annotation.
CamelyonLabel assign_label_camelyon(const PatchRecord& record, const Slide& slide, const Annotation* annotation,
                                    double annotation_tau = 1.0);

inline constexpr int kMaxMaskLabel = 5;

struct MaskPatch {
  Raster8 mask;
  std::array<std::uint64_t, kMaxMaskLabel + 1> histogram{};
};

/// Extracts the record's physical square from an aligned mask pyramid,
/// nearest-resized to out_px. Throws IllegalLabel for values above 5.
MaskPatch co_crop_mask(const Slide& mask_slide, const PatchRecord& record);

/// Picks slides_per_organ slides uniformly per listed organ, then
/// patches_per_slide records uniformly per chosen slide. Throws
/// InsufficientSlides when an organ (or a slide) is too small.
std::vector<PatchRecord> tiny_subset(const std::vector<PatchRecord>& records, const std::vector<std::string>& organs,
                                     int slides_per_organ, int patches_per_slide, std::uint64_t seed);

}  // namespace wsiset
