#include "wsiset/patch.hpp"

#include "wsiset/resample.hpp"

#include <cmath>

namespace wsiset {

PatchWindow plan_patch(const Slide& slide, double x0_um, double y0_um, double scale_um, int out_px) {
  const LevelChoice choice = level_for_mpp(slide, scale_um / out_px);
  const PyramidLevel& lv = slide.level(choice.level);
  PatchWindow w;
  w.level = choice.level;
  w.upsample = choice.upsample;
  w.extent = physical_extent_px(scale_um, lv.mpp.x);
  w.x = static_cast<int>(std::lround(x0_um / lv.mpp.x));
  w.y = static_cast<int>(std::lround(y0_um / lv.mpp.y));
  return w;
}

Raster8 extract_normalized_patch(const Slide& slide, double x0_um, double y0_um, double scale_um, int out_px) {
  const PatchWindow w = plan_patch(slide, x0_um, y0_um, scale_um, out_px);
  return bicubic_resize(read_region(slide, w.level, w.x, w.y, w.extent, w.extent), out_px, out_px);
}

Raster8 extract_normalized_mask(const Slide& mask_slide, double x0_um, double y0_um, double scale_um, int out_px) {
  const PatchWindow w = plan_patch(mask_slide, x0_um, y0_um, scale_um, out_px);
  return nearest_resize(read_region(mask_slide, w.level, w.x, w.y, w.extent, w.extent), out_px, out_px);
}

}  // namespace wsiset
