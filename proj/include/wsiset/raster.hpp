#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace wsiset {

/// Interleaved, row-major pixel buffer. 8-bit rasters hold raw sRGB or mask
/// labels; real-valued rasters hold intensities normalized to [0, 1].
template <typename Scalar>
struct Raster {
  using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using PlaneStride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
  using PlaneMap = Eigen::Map<Plane, Eigen::Unaligned, PlaneStride>;
  using ConstPlaneMap = Eigen::Map<const Plane, Eigen::Unaligned, PlaneStride>;

  int width = 0;
  int height = 0;
  int channels = 0;
  Buffer data;

  Raster() = default;
  Raster(int w, int h, int c) : width(w), height(h), channels(c), data(Buffer::Zero(Eigen::Index(w) * h * c)) {}
  Raster(int w, int h, int c, Scalar fill)
      : width(w), height(h), channels(c), data(Buffer::Constant(Eigen::Index(w) * h * c, fill)) {}

  bool empty() const { return data.size() == 0; }
  Eigen::Index pixel_count() const { return Eigen::Index(width) * height; }

  Scalar& operator()(int x, int y, int c = 0) { return data[(Eigen::Index(y) * width + x) * channels + c]; }
  Scalar operator()(int x, int y, int c = 0) const { return data[(Eigen::Index(y) * width + x) * channels + c]; }

  /// Strided view onto one channel as a height x width plane.
  PlaneMap plane(int c) {
    return PlaneMap(data.data() + c, height, width, PlaneStride(Eigen::Index(width) * channels, channels));
  }
  ConstPlaneMap plane(int c) const {
    return ConstPlaneMap(data.data() + c, height, width, PlaneStride(Eigen::Index(width) * channels, channels));
  }

  bool operator==(const Raster& other) const {
    return width == other.width && height == other.height && channels == other.channels &&
           (data == other.data).all();
  }
};

using Raster8 = Raster<std::uint8_t>;
using RasterF = Raster<float>;
using RasterD = Raster<double>;

template <typename Scalar>
Raster<Scalar> to_real(const Raster8& img) {
  Raster<Scalar> out(img.width, img.height, img.channels);
  out.data = img.data.template cast<Scalar>() / Scalar(255);
  return out;
}

/// Clips to [0, 1] and quantizes once, rounding half to even.
template <typename Scalar>
Raster8 quantize(const Raster<Scalar>& img) {
  Raster8 out(img.width, img.height, img.channels);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0) * 255.0;
    out.data[i] = static_cast<std::uint8_t>(std::nearbyint(v));
  }
  return out;
}

template <typename Scalar>
Raster<Scalar> crop(const Raster<Scalar>& img, int x, int y, int w, int h) {
  Raster<Scalar> out(w, h, img.channels);
  for (int c = 0; c < img.channels; ++c) out.plane(c) = img.plane(c).block(y, x, h, w);
  return out;
}

}  // namespace wsiset
