#pragma once

#include "wsiset/raster.hpp"
#include "wsiset/slide.hpp"

namespace wsiset {

/// Where a physical square lands in the pyramid.
struct PatchWindow {
  int level = 0;
  bool upsample = false;
  int x = 0;  ///< level pixels
  int y = 0;
  int extent = 0;  ///< side length in level pixels
};

/// Chooses the level for scale_um / out_px and maps the level-0 physical
/// square onto it. Does not check bounds.
PatchWindow plan_patch(const Slide& slide, double x0_um, double y0_um, double scale_um, int out_px);

/// Reads the physical square [x0, x0+scale) x [y0, y0+scale) (microns) and
/// resizes it bicubically to out_px x out_px, giving MPP scale_um / out_px.
Raster8 extract_normalized_patch(const Slide& slide, double x0_um, double y0_um, double scale_um, int out_px);

/// Same geometry as extract_normalized_patch but resized nearest-neighbour,
/// for label masks.
Raster8 extract_normalized_mask(const Slide& mask_slide, double x0_um, double y0_um, double scale_um, int out_px);

}  // namespace wsiset
