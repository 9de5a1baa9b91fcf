#pragma once

#include "wsiset/raster.hpp"
#include "wsiset/slide.hpp"

#include <array>
#include <cstdint>

namespace wsiset {

using Histogram256 = std::array<std::uint64_t, 256>;

struct OtsuResult {
  /// Cut point: class 0 is values < threshold, class 1 is values >= threshold.
  int threshold = 0;
  /// All mass sits in one bin; threshold is that bin.
  bool degenerate = false;
};

/// Maximizes between-class variance over all 256 cut points; ties go to the
/// lower threshold.
OtsuResult otsu_threshold(const Histogram256& histogram);

/// Rec. 601 luma (0.299, 0.587, 0.114), rounded half to even.
Raster8 luma(const Raster8& rgb);
Histogram256 histogram(const Raster8& gray);

struct PhysicalRect {
  double x = 0.0;  ///< level-0 microns
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct TissueMask {
  Raster8 mask;  ///< 1 channel, values in {0, 1}
  int level = 0;
  MppSpec mpp;   ///< physical size of one mask pixel
  double width_um = 0.0;
  double height_um = 0.0;
  int threshold = 0;
};

struct TissueOptions {
  double work_mpp = 8.0;
  int min_component_px = 64;
};

/// Otsu on the luma of the level chosen for work_mpp; tissue is darker than
/// the threshold. Cleaned with a 3x3 open then close, then components smaller
/// than min_component_px (8-connected) are removed. Throws NoTissue.
TissueMask tissue_mask(const Slide& slide, const TissueOptions& options = {});

/// Detector core on an already selected grayscale level.
Raster8 detect_tissue(const Raster8& gray, int min_component_px, int* threshold_out = nullptr);

Raster8 erode3x3(const Raster8& mask);
Raster8 dilate3x3(const Raster8& mask);
Raster8 remove_small_components(const Raster8& mask, int min_component_px);

/// Fraction of mask pixels inside `region` (pixel centers in the half-open
/// rectangle) that are tissue. Throws OutOfBounds when the region leaves the
/// slide.
double tissue_fraction(const TissueMask& mask, const PhysicalRect& region);

/// Same computation against any binary raster covering the slide.
double coverage_fraction(const Raster8& binary, const MppSpec& pixel_mpp, double width_um, double height_um,
                         const PhysicalRect& region);

}  // namespace wsiset
