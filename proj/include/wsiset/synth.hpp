#pragma once

#include "wsiset/raster.hpp"
#include "wsiset/slide.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wsiset {

enum class SynthKind { Ptcga, Camelyon, Panda };

std::string to_string(SynthKind kind);
SynthKind parse_synth_kind(const std::string& s);

/// Synthetic corpus: pale tissue ellipses on a white background, stored as
/// pyramids with 4x box downsampling between levels.
struct SynthOptions {
  SynthKind kind = SynthKind::Ptcga;
  int slides = 8;
  int size = 2048;  ///< level-0 width and height
  int levels = 3;
  double mpp = 0.390625;
  std::uint64_t seed = 0;
  std::vector<std::string> organs{"breast", "colon", "kidney", "lung"};
};

/// Averages `factor` x `factor` blocks; trailing partial blocks are averaged
/// over the pixels they contain.
Raster8 box_downsample(const Raster8& img, int factor);

/// Writes one slide directory per slide under `dir` and returns their paths
/// in id order. Camelyon tumor slides carry a polygon `annotation.json`; PANDA
/// slides carry a single-channel label pyramid in `mask/`.
std::vector<std::filesystem::path> synthesize_corpus(const std::filesystem::path& dir, const SynthOptions& options);

}  // namespace wsiset
