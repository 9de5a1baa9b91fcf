#pragma once

#include "wsiset/error.hpp"
#include "wsiset/raster.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace wsiset {

using PlaneD = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Keys cubic convolution kernel. a = -0.5 reproduces quadratics exactly.
inline double keys_cubic(double t, double a = -0.5) {
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
  return 0.0;
}

/// One-dimensional resampling stencil: for every output coordinate, the source
/// indices it reads (edge-clamped), their weights, and an anchor index.
/// Outputs are evaluated as src[anchor] + sum w_k (src[k] - src[anchor]), which
/// equals sum w_k src[k] when the weights sum to one and keeps constant inputs
/// bit-exact.
struct Taps {
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> index;
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> weight;
  Eigen::ArrayXi anchor;

  Eigen::Index size() const { return index.rows(); }
  Eigen::Index width() const { return index.cols(); }
};

/// Cubic stencil with pixel-center alignment: output pixel d samples the
/// source at (d + 0.5) * src / dst - 0.5.
inline Taps cubic_taps(int src, int dst) {
  Taps taps;
  taps.index.resize(dst, 4);
  taps.weight.resize(dst, 4);
  taps.anchor.resize(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    const double center = (d + 0.5) * scale - 0.5;
    const double base = std::floor(center);
    const double frac = center - base;
    const int b = static_cast<int>(base);
    for (int k = 0; k < 4; ++k) {
      taps.index(d, k) = std::clamp(b - 1 + k, 0, src - 1);
      taps.weight(d, k) = keys_cubic(frac - (k - 1));
    }
    taps.anchor(d) = std::clamp(b, 0, src - 1);
  }
  return taps;
}

/// Applies `taps` along the columns of each row (horizontal pass).
inline PlaneD apply_taps_rows(const Eigen::Ref<const PlaneD>& in, const Taps& taps) {
  PlaneD out(in.rows(), taps.size());
  for (Eigen::Index y = 0; y < in.rows(); ++y) {
    for (Eigen::Index d = 0; d < taps.size(); ++d) {
      const double ref = in(y, taps.anchor(d));
      double acc = 0.0;
      for (Eigen::Index k = 0; k < taps.width(); ++k) acc += taps.weight(d, k) * (in(y, taps.index(d, k)) - ref);
      out(y, d) = ref + acc;
    }
  }
  return out;
}

/// Applies `taps` along the rows of each column (vertical pass).
inline PlaneD apply_taps_cols(const Eigen::Ref<const PlaneD>& in, const Taps& taps) {
  PlaneD out(taps.size(), in.cols());
  for (Eigen::Index d = 0; d < taps.size(); ++d) {
    out.row(d) = in.row(taps.anchor(d));
    for (Eigen::Index k = 0; k < taps.width(); ++k)
      out.row(d) += taps.weight(d, k) * (in.row(taps.index(d, k)) - in.row(taps.anchor(d)));
  }
  return out;
}

/// Separable bicubic resize of an unbounded real plane (no clipping).
inline PlaneD cubic_resize_plane(const Eigen::Ref<const PlaneD>& in, Eigen::Index dst_h, Eigen::Index dst_w) {
  if (in.rows() == dst_h && in.cols() == dst_w) return in;
  const Taps tx = cubic_taps(static_cast<int>(in.cols()), static_cast<int>(dst_w));
  const Taps ty = cubic_taps(static_cast<int>(in.rows()), static_cast<int>(dst_h));
  return apply_taps_cols(apply_taps_rows(in, tx), ty);
}

namespace detail {

template <typename Scalar>
PlaneD plane_as_double(const Raster<Scalar>& img, int c) {
  return img.plane(c).template cast<double>();
}

}  // namespace detail

/// Bicubic resize of a normalized real raster; output is clipped to [0, 1].
template <typename Scalar>
Raster<Scalar> bicubic_resize(const Raster<Scalar>& img, int dst_w, int dst_h) {
  if (img.width == dst_w && img.height == dst_h) return img;
  Raster<Scalar> out(dst_w, dst_h, img.channels);
  const Taps tx = cubic_taps(img.width, dst_w);
  const Taps ty = cubic_taps(img.height, dst_h);
  for (int c = 0; c < img.channels; ++c) {
    const PlaneD r = apply_taps_cols(apply_taps_rows(detail::plane_as_double(img, c), tx), ty);
    out.plane(c) = r.cwiseMax(0.0).cwiseMin(1.0).template cast<Scalar>();
  }
  return out;
}

/// 8-bit bicubic resize: computed in normalized reals, quantized once.
inline Raster8 bicubic_resize(const Raster8& img, int dst_w, int dst_h) {
  if (img.width == dst_w && img.height == dst_h) return img;
  return quantize(bicubic_resize(to_real<double>(img), dst_w, dst_h));
}

/// Nearest-neighbour source index under pixel-center alignment.
inline int nearest_index(int d, int src, int dst) {
  return std::min(static_cast<int>((2LL * d + 1) * src / (2LL * dst)), src - 1);
}

/// Nearest-neighbour resize; the output value set is a subset of the input's.
template <typename Scalar>
Raster<Scalar> nearest_resize(const Raster<Scalar>& img, int dst_w, int dst_h) {
  if (img.width == dst_w && img.height == dst_h) return img;
  Raster<Scalar> out(dst_w, dst_h, img.channels);
  for (int y = 0; y < dst_h; ++y) {
    const int sy = nearest_index(y, img.height, dst_h);
    for (int x = 0; x < dst_w; ++x) {
      const int sx = nearest_index(x, img.width, dst_w);
      for (int c = 0; c < img.channels; ++c) out(x, y, c) = img(sx, sy, c);
    }
  }
  return out;
}

struct CropOffset {
  int x = 0;
  int y = 0;
};

inline CropOffset center_crop_offset(int width, int height, int size) {
  if (size < 1 || size > std::min(width, height))
    throw Error(ErrorKind::CropTooLarge,
                "crop " + std::to_string(size) + " exceeds " + std::to_string(width) + "x" + std::to_string(height));
  return {(width - size) / 2, (height - size) / 2};
}

template <typename Scalar>
Raster<Scalar> center_crop(const Raster<Scalar>& img, int size) {
  const CropOffset o = center_crop_offset(img.width, img.height, size);
  return crop(img, o.x, o.y, size, size);
}

/// MPP of an image after cropping `crop_px` from a source at `source_mpp`
/// and resizing the crop to `out_px`.
inline double effective_mpp(double source_mpp, double crop_px, double out_px) {
  return source_mpp * crop_px / out_px;
}

}  // namespace wsiset
