#pragma once

#include "wsiset/raster.hpp"

#include <filesystem>

namespace wsiset {

/// Decodes an 8-bit PNG into a 1-channel (gray) or 3-channel (RGB) raster.
/// Alpha is dropped and palettes are expanded.
Raster8 read_png(const std::filesystem::path& path);

/// Encodes a 1- or 3-channel raster. Output bytes depend only on the pixels and
/// the compression level, so identical inputs give identical files.
void write_png(const std::filesystem::path& path, const Raster8& img, int compression_level = 1);

/// Writes a 1-bit grayscale PNG; any nonzero pixel becomes white.
void write_png_1bit(const std::filesystem::path& path, const Raster8& mask);

}  // namespace wsiset
