#include "wsiset/tissue.hpp"

#include "wsiset/error.hpp"

#include <cmath>
#include <vector>

namespace wsiset {

OtsuResult otsu_threshold(const Histogram256& hist) {
  double total = 0.0;
  double total_sum = 0.0;
  int nonzero = 0;
  int last_bin = 0;
  for (int i = 0; i < 256; ++i) {
    total += static_cast<double>(hist[i]);
    total_sum += static_cast<double>(hist[i]) * i;
    if (hist[i]) {
      ++nonzero;
      last_bin = i;
    }
  }
  if (total <= 0.0) throw Error(ErrorKind::InvalidConfig, "empty histogram");
  if (nonzero == 1) return {last_bin, true};

  int best = 0;
  double best_var = -1.0;
  double below = 0.0;
  double below_sum = 0.0;
  for (int t = 0; t < 256; ++t) {
    double var = 0.0;
    const double above = total - below;
    if (below > 0.0 && above > 0.0) {
      const double mu0 = below_sum / below;
      const double mu1 = (total_sum - below_sum) / above;
      var = (below / total) * (above / total) * (mu0 - mu1) * (mu0 - mu1);
    }
    if (var > best_var) {
      best_var = var;
      best = t;
    }
    below += static_cast<double>(hist[t]);
    below_sum += static_cast<double>(hist[t]) * t;
  }
  return {best, false};
}

Raster8 luma(const Raster8& rgb) {
  if (rgb.channels == 1) return rgb;
  if (rgb.channels != 3) throw Error(ErrorKind::ChannelMismatch, "luma needs RGB input");
  Raster8 out(rgb.width, rgb.height, 1);
  for (Eigen::Index i = 0; i < out.pixel_count(); ++i) {
    const double y = 0.299 * rgb.data[3 * i] + 0.587 * rgb.data[3 * i + 1] + 0.114 * rgb.data[3 * i + 2];
    out.data[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(y), 0.0, 255.0));
  }
  return out;
}

Histogram256 histogram(const Raster8& gray) {
  Histogram256 h{};
  for (Eigen::Index i = 0; i < gray.data.size(); ++i) ++h[gray.data[i]];
  return h;
}

namespace {

template <bool Erode>
Raster8 morph3x3(const Raster8& mask) {
  Raster8 out(mask.width, mask.height, 1);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool v = Erode;
      for (int dy = -1; dy <= 1; ++dy) {
        const int sy = std::clamp(y + dy, 0, mask.height - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const bool s = mask(std::clamp(x + dx, 0, mask.width - 1), sy) != 0;
          v = Erode ? (v && s) : (v || s);
        }
      }
      out(x, y) = v ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

Raster8 erode3x3(const Raster8& mask) { return morph3x3<true>(mask); }
Raster8 dilate3x3(const Raster8& mask) { return morph3x3<false>(mask); }

Raster8 remove_small_components(const Raster8& mask, int min_component_px) {
  Raster8 out = mask;
  if (min_component_px <= 1) return out;
  const int w = mask.width;
  const int h = mask.height;
  std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<int> component;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (seen[start] || !mask.data[start]) continue;
    component.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const int px = p % w;
      const int py = p / w;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = px + dx;
          const int ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (!seen[q] && mask.data[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
    }
    if (static_cast<int>(component.size()) < min_component_px)
      for (int p : component) out.data[p] = 0;
  }
  return out;
}

Raster8 detect_tissue(const Raster8& gray, int min_component_px, int* threshold_out) {
  const OtsuResult otsu = otsu_threshold(histogram(gray));
  if (threshold_out) *threshold_out = otsu.threshold;
  Raster8 raw(gray.width, gray.height, 1);
  raw.data = (gray.data.cast<int>() < otsu.threshold).cast<std::uint8_t>();
  const Raster8 opened = dilate3x3(erode3x3(raw));
  const Raster8 closed = erode3x3(dilate3x3(opened));
  return remove_small_components(closed, min_component_px);
}

TissueMask tissue_mask(const Slide& slide, const TissueOptions& options) {
  const LevelChoice choice = level_for_mpp(slide, options.work_mpp);
  const PyramidLevel& lv = slide.level(choice.level);
  const auto pixels = slide.reader->level_pixels(choice.level);
  TissueMask out;
  out.level = choice.level;
  out.mpp = lv.mpp;
  out.width_um = slide.width_um();
  out.height_um = slide.height_um();
  out.mask = detect_tissue(luma(*pixels), options.min_component_px, &out.threshold);
  if ((out.mask.data == std::uint8_t(0)).all()) throw Error(ErrorKind::NoTissue, slide.id + ": no tissue detected");
  return out;
}

namespace {

/// Pixel index range whose centers fall in [lo, hi) (pixel units).
std::pair<int, int> center_range(double lo, double hi, int n) {
  int first = static_cast<int>(std::ceil(lo - 0.5));
  int last = static_cast<int>(std::ceil(hi - 0.5));  // exclusive
  if (last <= first) {
    first = static_cast<int>(std::floor(0.5 * (lo + hi)));
    last = first + 1;
  }
  return {std::clamp(first, 0, n), std::clamp(last, 0, n)};
}

}  // namespace

double coverage_fraction(const Raster8& binary, const MppSpec& pixel_mpp, double width_um, double height_um,
                         const PhysicalRect& r) {
  const double slack = 1e-6 * std::max(width_um, height_um);
  if (r.w <= 0.0 || r.h <= 0.0 || r.x < -slack || r.y < -slack || r.x + r.w > width_um + slack ||
      r.y + r.h > height_um + slack)
    throw Error(ErrorKind::OutOfBounds, "region outside slide");
  const auto [x0, x1] = center_range(r.x / pixel_mpp.x, (r.x + r.w) / pixel_mpp.x, binary.width);
  const auto [y0, y1] = center_range(r.y / pixel_mpp.y, (r.y + r.h) / pixel_mpp.y, binary.height);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  long long hits = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) hits += binary(x, y) != 0;
  return static_cast<double>(hits) / (static_cast<double>(x1 - x0) * (y1 - y0));
}

double tissue_fraction(const TissueMask& mask, const PhysicalRect& region) {
  return coverage_fraction(mask.mask, mask.mpp, mask.width_um, mask.height_um, region);
}

}  // namespace wsiset
