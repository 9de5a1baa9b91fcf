#pragma once

#include "wsiset/error.hpp"
#include "wsiset/raster.hpp"
#include "wsiset/resample.hpp"
#include "wsiset/rng.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace wsiset {

// Op names, also the keys accepted by AugmentConfig::ablate.
inline constexpr std::string_view kOpRandomResizedCrop = "random_resized_crop";
inline constexpr std::string_view kOpRandomCrop = "random_crop";
inline constexpr std::string_view kOpColorJitter = "color_jitter";
inline constexpr std::string_view kOpGrayscale = "random_grayscale";
inline constexpr std::string_view kOpGaussianBlur = "gaussian_blur";
inline constexpr std::string_view kOpHFlip = "hflip";
inline constexpr std::string_view kOpVFlip = "vflip";

struct JitterParams {
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  double p = 0.8;
};

/// Training augmentation suite, applied in this order: random resized crop
/// (random crop in segmentation mode), color jitter, grayscale (SSL mode
/// only), Gaussian blur, horizontal flip, vertical flip, normalization.
struct AugmentConfig {
  int out_px = 512;
  double rrc_scale_min = 0.2;
  std::array<double, 2> rrc_ratio{3.0 / 4.0, 4.0 / 3.0};
  JitterParams jitter;
  bool ssl_mode = false;
  double grayscale_p = 0.2;
  std::array<double, 2> blur_sigma{0.1, 2.0};
  double blur_p = 0.5;
  double hflip_p = 0.5;
  double vflip_p = 0.5;
  bool segmentation_mode = false;
  int seg_crop_px = 512;
  Eigen::Array3d mean = Eigen::Array3d::Constant(0.5);
  Eigen::Array3d std = Eigen::Array3d::Constant(0.5);
  std::set<std::string, std::less<>> ablate;

  bool enabled(std::string_view op) const { return ablate.find(op) == ablate.end(); }

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidConfig, std::string(name) + " must lie in [0, 1]");
    };
    prob(jitter.p, "jitter probability");
    prob(grayscale_p, "grayscale probability");
    prob(blur_p, "blur probability");
    prob(hflip_p, "hflip probability");
    prob(vflip_p, "vflip probability");
    if (!(rrc_scale_min > 0.0 && rrc_scale_min <= 1.0)) throw Error(ErrorKind::InvalidConfig, "rrc scale_min in (0, 1]");
    if (!(rrc_ratio[0] > 0.0 && rrc_ratio[0] <= rrc_ratio[1])) throw Error(ErrorKind::InvalidConfig, "bad rrc ratio");
    if (!(blur_sigma[0] > 0.0 && blur_sigma[0] <= blur_sigma[1])) throw Error(ErrorKind::InvalidConfig, "bad sigma range");
    if (!(std > 0.0).all()) throw Error(ErrorKind::InvalidConfig, "normalization std must be positive");
    if (out_px < 1 || seg_crop_px < 1) throw Error(ErrorKind::InvalidConfig, "output sizes must be positive");
    for (const auto& name : ablate)
      if (name != kOpRandomResizedCrop && name != kOpRandomCrop && name != kOpColorJitter && name != kOpGrayscale &&
          name != kOpGaussianBlur && name != kOpHFlip && name != kOpVFlip)
        throw Error(ErrorKind::InvalidConfig, "unknown augmentation op '" + name + "'");
  }
};

/// Seeded source of per-op streams. Each op draws only from the stream named
/// after it, so disabling one op never shifts another op's randomness.
struct AugRng {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  Stream op(std::string_view name) const { return Stream(derive_key(derive_key(seed, stream), name)); }
};

// ---------------------------------------------------------------------------
// Geometric ops

struct CropBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  double sampled_area_fraction = 1.0;  ///< drawn target area / input area
  bool fallback = false;

  bool operator==(const CropBox&) const = default;
};

/// Area fraction U[scale_min, 1] and log-uniform aspect ratio; up to 10
/// placement attempts, then a ratio-clamped center crop.
inline CropBox sample_rrc_box(int width, int height, double scale_min, const std::array<double, 2>& ratio,
                              Stream& rng) {
  const double area = static_cast<double>(width) * height;
  const double log_lo = std::log(ratio[0]);
  const double log_hi = std::log(ratio[1]);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double frac = rng.uniform(scale_min, 1.0);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(area * frac * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(area * frac / aspect)));
    if (w > 0 && w <= width && h > 0 && h <= height) {
      CropBox box{0, 0, w, h, frac, false};
      box.y = static_cast<int>(rng.integer(0, height - h));
      box.x = static_cast<int>(rng.integer(0, width - w));
      return box;
    }
  }
  const double in_ratio = static_cast<double>(width) / height;
  int w = width;
  int h = height;
  if (in_ratio < ratio[0]) {
    h = static_cast<int>(std::lround(w / ratio[0]));
  } else if (in_ratio > ratio[1]) {
    w = static_cast<int>(std::lround(h * ratio[1]));
  }
  return {(width - w) / 2, (height - h) / 2, w, h, static_cast<double>(w) * h / area, true};
}

template <typename Scalar>
Raster<Scalar> random_resized_crop(const Raster<Scalar>& img, int out_px, double scale_min,
                                   const std::array<double, 2>& ratio, Stream& rng, CropBox* box_out = nullptr) {
  const CropBox box = sample_rrc_box(img.width, img.height, scale_min, ratio, rng);
  if (box_out) *box_out = box;
  return bicubic_resize(crop(img, box.x, box.y, box.w, box.h), out_px, out_px);
}

inline CropBox sample_random_crop(int width, int height, int size, Stream& rng) {
  if (size > width || size > height)
    throw Error(ErrorKind::CropTooLarge, "random crop " + std::to_string(size) + " larger than input");
  CropBox box{0, 0, size, size, static_cast<double>(size) * size / (static_cast<double>(width) * height), false};
  box.y = static_cast<int>(rng.integer(0, height - size));
  box.x = static_cast<int>(rng.integer(0, width - size));
  return box;
}

template <typename Scalar>
Raster<Scalar> hflip(const Raster<Scalar>& img) {
  Raster<Scalar> out(img.width, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c) out.plane(c) = img.plane(c).rowwise().reverse();
  return out;
}

template <typename Scalar>
Raster<Scalar> vflip(const Raster<Scalar>& img) {
  Raster<Scalar> out(img.width, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c) out.plane(c) = img.plane(c).colwise().reverse();
  return out;
}

// ---------------------------------------------------------------------------
// Photometric ops on normalized RGB in [0, 1]

namespace detail {

template <typename Scalar>
void require_rgb(const Raster<Scalar>& img) {
  if (img.channels != 3) throw Error(ErrorKind::ChannelMismatch, "photometric op needs RGB");
}

template <typename Scalar>
Raster<Scalar> clip01(Raster<Scalar> img) {
  img.data = img.data.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  return img;
}

template <typename Scalar>
PlaneD gray_plane(const Raster<Scalar>& img) {
  return 0.299 * img.plane(0).template cast<double>() + 0.587 * img.plane(1).template cast<double>() +
         0.114 * img.plane(2).template cast<double>();
}

/// out = factor * img + (1 - factor) * other, clipped.
template <typename Scalar>
Raster<Scalar> blend(const Raster<Scalar>& img, const PlaneD& other, double factor) {
  Raster<Scalar> out(img.width, img.height, 3);
  for (int c = 0; c < 3; ++c)
    out.plane(c) = (factor * img.plane(c).template cast<double>() + (1.0 - factor) * other)
                       .cwiseMax(0.0)
                       .cwiseMin(1.0)
                       .template cast<Scalar>();
  return out;
}

}  // namespace detail

template <typename Scalar>
Raster<Scalar> adjust_brightness(const Raster<Scalar>& img, double factor) {
  detail::require_rgb(img);
  Raster<Scalar> out = img;
  out.data = (img.data.template cast<double>() * factor).template cast<Scalar>();
  return detail::clip01(std::move(out));
}

/// Blends towards the mean luma of the whole image.
template <typename Scalar>
Raster<Scalar> adjust_contrast(const Raster<Scalar>& img, double factor) {
  detail::require_rgb(img);
  const double m = detail::gray_plane(img).mean();
  return detail::blend(img, PlaneD::Constant(img.height, img.width, m), factor);
}

/// Blends towards the per-pixel luma.
template <typename Scalar>
Raster<Scalar> adjust_saturation(const Raster<Scalar>& img, double factor) {
  detail::require_rgb(img);
  return detail::blend(img, detail::gray_plane(img), factor);
}

/// Rotates hue by `shift` turns of the hue circle (HSV).
template <typename Scalar>
Raster<Scalar> adjust_hue(const Raster<Scalar>& img, double shift) {
  detail::require_rgb(img);
  Raster<Scalar> out(img.width, img.height, 3);
  for (Eigen::Index i = 0; i < img.pixel_count(); ++i) {
    const double r = img.data[3 * i];
    const double g = img.data[3 * i + 1];
    const double b = img.data[3 * i + 2];
    const double maxc = std::max({r, g, b});
    const double minc = std::min({r, g, b});
    const double v = maxc;
    const double cr = maxc - minc;
    double h = 0.0;
    double s = 0.0;
    if (cr > 0.0) {
      s = cr / maxc;
      const double rc = (maxc - r) / cr;
      const double gc = (maxc - g) / cr;
      const double bc = (maxc - b) / cr;
      if (maxc == r)
        h = bc - gc;
      else if (maxc == g)
        h = 2.0 + rc - bc;
      else
        h = 4.0 + gc - rc;
      h = h / 6.0;
    }
    h = h + shift;
    h -= std::floor(h);
    const double h6 = h * 6.0;
    const int sector = static_cast<int>(std::floor(h6)) % 6;
    const double f = h6 - std::floor(h6);
    const double p = std::clamp(v * (1.0 - s), 0.0, 1.0);
    const double q = std::clamp(v * (1.0 - s * f), 0.0, 1.0);
    const double t = std::clamp(v * (1.0 - s * (1.0 - f)), 0.0, 1.0);
    double rgb[3];
    switch (sector) {
      case 0: rgb[0] = v, rgb[1] = t, rgb[2] = p; break;
      case 1: rgb[0] = q, rgb[1] = v, rgb[2] = p; break;
      case 2: rgb[0] = p, rgb[1] = v, rgb[2] = t; break;
      case 3: rgb[0] = p, rgb[1] = q, rgb[2] = v; break;
      case 4: rgb[0] = t, rgb[1] = p, rgb[2] = v; break;
      default: rgb[0] = v, rgb[1] = p, rgb[2] = q; break;
    }
    for (int c = 0; c < 3; ++c) out.data[3 * i + c] = static_cast<Scalar>(rgb[c]);
  }
  return out;
}

struct JitterDecision {
  bool applied = false;
  std::array<double, 4> factors{1.0, 1.0, 1.0, 0.0};  ///< brightness, contrast, saturation, hue shift
  std::array<int, 4> order{0, 1, 2, 3};
  std::array<bool, 4> active{false, false, false, false};

  bool operator==(const JitterDecision&) const = default;
};

/// Trigger, four factors and a sub-op permutation, always drawn in that order.
inline JitterDecision sample_jitter(const JitterParams& params, Stream& rng) {
  JitterDecision d;
  d.applied = rng.bernoulli(params.p);
  const double spans[3] = {params.brightness, params.contrast, params.saturation};
  for (int k = 0; k < 3; ++k) {
    d.factors[k] = rng.uniform(std::max(0.0, 1.0 - spans[k]), 1.0 + spans[k]);
    d.active[k] = spans[k] > 0.0;
  }
  d.factors[3] = rng.uniform(-params.hue, params.hue);
  d.active[3] = params.hue > 0.0;
  for (int i = 3; i > 0; --i) std::swap(d.order[i], d.order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  return d;
}

template <typename Scalar>
Raster<Scalar> apply_jitter(const Raster<Scalar>& img, const JitterDecision& d) {
  if (!d.applied) return img;
  Raster<Scalar> out = img;
  for (int op : d.order) {
    if (!d.active[op]) continue;
    switch (op) {
      case 0: out = adjust_brightness(out, d.factors[0]); break;
      case 1: out = adjust_contrast(out, d.factors[1]); break;
      case 2: out = adjust_saturation(out, d.factors[2]); break;
      default: out = adjust_hue(out, d.factors[3]); break;
    }
  }
  return out;
}

template <typename Scalar>
Raster<Scalar> color_jitter(const Raster<Scalar>& img, const JitterParams& params, Stream& rng) {
  detail::require_rgb(img);
  return apply_jitter(img, sample_jitter(params, rng));
}

/// Luma replicated to all three channels.
template <typename Scalar>
Raster<Scalar> to_grayscale(const Raster<Scalar>& img) {
  detail::require_rgb(img);
  Raster<Scalar> out(img.width, img.height, 3);
  const PlaneD g = detail::gray_plane(img);
  for (int c = 0; c < 3; ++c) out.plane(c) = g.template cast<Scalar>();
  return out;
}

template <typename Scalar>
Raster<Scalar> random_grayscale(const Raster<Scalar>& img, double p, Stream& rng) {
  return rng.bernoulli(p) ? to_grayscale(img) : img;
}

/// Normalized Gaussian stencil of radius ceil(4 sigma), edge-clamped.
inline Taps gaussian_taps(int n, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  const int width = 2 * radius + 1;
  Eigen::ArrayXd kernel(width);
  for (int k = 0; k < width; ++k) kernel[k] = std::exp(-0.5 * std::pow((k - radius) / sigma, 2));
  kernel /= kernel.sum();
  Taps taps;
  taps.index.resize(n, width);
  taps.weight.resize(n, width);
  taps.anchor.resize(n);
  for (int d = 0; d < n; ++d) {
    for (int k = 0; k < width; ++k) {
      taps.index(d, k) = std::clamp(d + k - radius, 0, n - 1);
      taps.weight(d, k) = kernel[k];
    }
    taps.anchor(d) = d;
  }
  return taps;
}

template <typename Scalar>
Raster<Scalar> gaussian_blur(const Raster<Scalar>& img, double sigma) {
  Raster<Scalar> out(img.width, img.height, img.channels);
  const Taps tx = gaussian_taps(img.width, sigma);
  const Taps ty = gaussian_taps(img.height, sigma);
  for (int c = 0; c < img.channels; ++c)
    out.plane(c) = apply_taps_cols(apply_taps_rows(detail::plane_as_double(img, c), tx), ty).template cast<Scalar>();
  return out;
}

struct BlurDecision {
  bool applied = false;
  double sigma = 0.0;

  bool operator==(const BlurDecision&) const = default;
};

inline BlurDecision sample_blur(const std::array<double, 2>& sigma_range, double p, Stream& rng) {
  BlurDecision d;
  d.applied = rng.bernoulli(p);
  d.sigma = rng.uniform(sigma_range[0], sigma_range[1]);
  return d;
}

template <typename Scalar>
Raster<Scalar> random_gaussian_blur(const Raster<Scalar>& img, const std::array<double, 2>& sigma_range, double p,
                                    Stream& rng) {
  const BlurDecision d = sample_blur(sigma_range, p, rng);
  return d.applied ? gaussian_blur(img, d.sigma) : img;
}

template <typename Scalar>
Raster<Scalar> normalize(const Raster<Scalar>& img, const Eigen::Array3d& mean, const Eigen::Array3d& std) {
  detail::require_rgb(img);
  Raster<Scalar> out(img.width, img.height, 3);
  for (int c = 0; c < 3; ++c)
    out.plane(c) = ((img.plane(c).template cast<double>() - mean[c]) / std[c]).template cast<Scalar>();
  return out;
}

// ---------------------------------------------------------------------------
// Pipelines

/// Every decision the training pipeline took; disabled ops keep defaults.
struct AugTrace {
  std::optional<CropBox> crop;
  JitterDecision jitter;
  bool grayscale = false;
  BlurDecision blur;
  bool hflip = false;
  bool vflip = false;
};

template <typename Scalar>
struct AugResult {
  Raster<Scalar> image;
  std::optional<Raster8> mask;
  AugTrace trace;
};

/// Runs the training suite. Geometric ops act identically on image and mask
/// (mask nearest-neighbour); photometric ops touch the image only. Throws
/// ConfigConflict unless a mask is given exactly in segmentation mode.
template <typename Scalar>
AugResult<Scalar> apply_train(const Raster<Scalar>& img, const std::optional<Raster8>& mask,
                              const AugmentConfig& cfg, const AugRng& rng) {
  cfg.validate();
  if (mask.has_value() != cfg.segmentation_mode)
    throw Error(ErrorKind::ConfigConflict, "a mask is required exactly when segmentation_mode is set");
  if (mask && (mask->width != img.width || mask->height != img.height))
    throw Error(ErrorKind::ShapeMismatch, "mask and image sizes differ");
  AugResult<Scalar> r{img, mask, {}};

  if (cfg.segmentation_mode) {
    if (cfg.enabled(kOpRandomCrop)) {
      Stream s = rng.op(kOpRandomCrop);
      const CropBox box = sample_random_crop(img.width, img.height, cfg.seg_crop_px, s);
      r.image = crop(r.image, box.x, box.y, box.w, box.h);
      r.mask = crop(*r.mask, box.x, box.y, box.w, box.h);
      r.trace.crop = box;
    }
  } else if (cfg.enabled(kOpRandomResizedCrop)) {
    Stream s = rng.op(kOpRandomResizedCrop);
    CropBox box;
    r.image = random_resized_crop(r.image, cfg.out_px, cfg.rrc_scale_min, cfg.rrc_ratio, s, &box);
    r.trace.crop = box;
  }

  if (cfg.enabled(kOpColorJitter)) {
    Stream s = rng.op(kOpColorJitter);
    r.trace.jitter = sample_jitter(cfg.jitter, s);
    r.image = apply_jitter(r.image, r.trace.jitter);
  }
  if (cfg.ssl_mode && cfg.enabled(kOpGrayscale)) {
    Stream s = rng.op(kOpGrayscale);
    r.trace.grayscale = s.bernoulli(cfg.grayscale_p);
    if (r.trace.grayscale) r.image = to_grayscale(r.image);
  }
  if (cfg.enabled(kOpGaussianBlur)) {
    Stream s = rng.op(kOpGaussianBlur);
    r.trace.blur = sample_blur(cfg.blur_sigma, cfg.blur_p, s);
    if (r.trace.blur.applied) r.image = gaussian_blur(r.image, r.trace.blur.sigma);
  }
  if (cfg.enabled(kOpHFlip)) {
    Stream s = rng.op(kOpHFlip);
    r.trace.hflip = s.bernoulli(cfg.hflip_p);
    if (r.trace.hflip) {
      r.image = hflip(r.image);
      if (r.mask) r.mask = hflip(*r.mask);
    }
  }
  if (cfg.enabled(kOpVFlip)) {
    Stream s = rng.op(kOpVFlip);
    r.trace.vflip = s.bernoulli(cfg.vflip_p);
    if (r.trace.vflip) {
      r.image = vflip(r.image);
      if (r.mask) r.mask = vflip(*r.mask);
    }
  }
  r.image = normalize(r.image, cfg.mean, cfg.std);
  return r;
}

enum class DatasetKind { Ptcga200, Pcam200, SegPanda200, Other };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

inline constexpr int kEvalCenterCrop = 287;

/// Evaluation transform: center crop 287 for the two classification kinds,
/// then normalization.
template <typename Scalar>
Raster<Scalar> apply_eval(const Raster<Scalar>& img, DatasetKind kind, const Eigen::Array3d& mean,
                          const Eigen::Array3d& std) {
  if (kind == DatasetKind::Ptcga200 || kind == DatasetKind::Pcam200)
    return normalize(center_crop(img, kEvalCenterCrop), mean, std);
  return normalize(img, mean, std);
}

}  // namespace wsiset
