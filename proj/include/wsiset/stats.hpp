#pragma once

#include "wsiset/error.hpp"
#include "wsiset/raster.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <type_traits>

namespace wsiset {

/// Running per-channel moments of normalized RGB values.
struct ChannelMoments {
  std::uint64_t count = 0;
  Eigen::Array3d mean = Eigen::Array3d::Zero();
  Eigen::Array3d m2 = Eigen::Array3d::Zero();  ///< sum of squared deviations

  /// Welford step with one sample.
  void push(const Eigen::Array3d& x) {
    ++count;
    const Eigen::Array3d delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
};

/// Chan et al. pairwise combination.
inline ChannelMoments merge(const ChannelMoments& a, const ChannelMoments& b) {
  if (b.count == 0) return a;
  if (a.count == 0) return b;
  ChannelMoments out;
  out.count = a.count + b.count;
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double n = static_cast<double>(out.count);
  const Eigen::Array3d delta = b.mean - a.mean;
  out.mean = (na * a.mean + nb * b.mean) / n;
  out.m2 = a.m2 + b.m2 + delta.square() * (na * nb / n);
  return out;
}

/// Feeds every pixel of an RGB image, scaled to [0, 1]. The image's own
/// moments are folded in with merge(); for 8-bit input they come from exact
/// integer sums, otherwise from two passes.
template <typename Scalar>
ChannelMoments update(const ChannelMoments& acc, const Raster<Scalar>& img) {
  if (img.channels != 3) throw Error(ErrorKind::ChannelMismatch, "statistics need 3-channel images");
  if (img.pixel_count() == 0) return acc;
  ChannelMoments block;
  block.count = static_cast<std::uint64_t>(img.pixel_count());
  const double n = static_cast<double>(block.count);
  if constexpr (std::is_integral_v<Scalar>) {
    std::uint64_t sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
    const Scalar* p = img.data.data();
    for (Eigen::Index i = 0; i < img.pixel_count(); ++i, p += 3)
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t v = static_cast<std::uint64_t>(p[c]);
        sum[c] += v;
        sq[c] += v * v;
      }
    for (int c = 0; c < 3; ++c) {
      // n * sum(x^2) - sum(x)^2 is exact in 64 bits below ~2^32 pixels.
      const std::uint64_t num = block.count * sq[c] - sum[c] * sum[c];
      block.mean[c] = static_cast<double>(sum[c]) / n / 255.0;
      block.m2[c] = static_cast<double>(num) / n / (255.0 * 255.0);
    }
  } else {
    for (int c = 0; c < 3; ++c) {
      const Eigen::ArrayXd v = img.plane(c).template cast<double>().reshaped();
      block.mean[c] = v.mean();
      block.m2[c] = (v - block.mean[c]).square().sum();
    }
  }
  return merge(acc, block);
}

/// Alternative statistic: each image contributes its own mean as one sample.
template <typename Scalar>
ChannelMoments update_per_image_mean(ChannelMoments acc, const Raster<Scalar>& img) {
  if (img.channels != 3) throw Error(ErrorKind::ChannelMismatch, "statistics need 3-channel images");
  if (img.pixel_count() == 0) return acc;
  const double scale = std::is_integral_v<Scalar> ? 1.0 / 255.0 : 1.0;
  Eigen::Array3d sum = Eigen::Array3d::Zero();
  for (int c = 0; c < 3; ++c) sum[c] = img.plane(c).template cast<double>().sum();
  acc.push(sum * scale / static_cast<double>(img.pixel_count()));
  return acc;
}

struct ChannelStats {
  Eigen::Array3d mean = Eigen::Array3d::Zero();
  Eigen::Array3d std = Eigen::Array3d::Zero();
  bool degenerate = false;  ///< a single sample; std reported as 0
};

/// Population standard deviation sqrt(m2 / count). Throws EmptyAccumulator.
inline ChannelStats finalize(const ChannelMoments& acc) {
  if (acc.count == 0) throw Error(ErrorKind::EmptyAccumulator, "no samples accumulated");
  ChannelStats s;
  s.mean = acc.mean;
  s.degenerate = acc.count < 2;
  s.std = s.degenerate ? Eigen::Array3d::Zero().eval() : (acc.m2.max(0.0) / static_cast<double>(acc.count)).sqrt().eval();
  return s;
}

/// Published whole-dataset RGB statistics of the large TCGA patch dataset,
/// carried into manifests as reference values.
inline const Eigen::Array3d kPtcga200ReferenceMean{0.7184, 0.5076, 0.6476};
inline const Eigen::Array3d kPtcga200ReferenceStd{0.0380, 0.0527, 0.0352};

}  // namespace wsiset
