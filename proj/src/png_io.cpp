#include "wsiset/png_io.hpp"

#include "wsiset/error.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

namespace wsiset {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Rows must be prepared before setjmp so nothing with a destructor is live
// across the longjmp.
bool encode(std::FILE* fp, int width, int height, int bit_depth, int color_type, int level,
            const std::vector<png_bytep>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_compression_level(png, level);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

FilePtr open_for_write(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(ErrorKind::IoError, "cannot open for writing: " + path.string());
  return fp;
}

}  // namespace

Raster8 read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    const std::string msg = image.message;
    png_image_free(&image);
    const auto kind = std::filesystem::exists(path) ? ErrorKind::DecodeError : ErrorKind::IoError;
    throw Error(kind, path.string() + ": " + msg);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Raster8 out(static_cast<int>(image.width), static_cast<int>(image.height), gray ? 1 : 3);
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::DecodeError, path.string() + ": " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Raster8& img, int compression_level) {
  if (img.channels != 1 && img.channels != 3)
    throw Error(ErrorKind::ChannelMismatch, "PNG writer supports 1 or 3 channels");
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  auto* base = const_cast<std::uint8_t*>(img.data.data());
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = base + y * stride;
  auto fp = open_for_write(path);
  const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  if (!encode(fp.get(), img.width, img.height, 8, color, compression_level, rows))
    throw Error(ErrorKind::IoError, "PNG encode failed: " + path.string());
}

void write_png_1bit(const std::filesystem::path& path, const Raster8& mask) {
  if (mask.channels != 1) throw Error(ErrorKind::ChannelMismatch, "1-bit PNG needs a single channel");
  const std::size_t row_bytes = (static_cast<std::size_t>(mask.width) + 7) / 8;
  std::vector<std::uint8_t> packed(row_bytes * static_cast<std::size_t>(mask.height), 0);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask(x, y)) packed[y * row_bytes + x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
  std::vector<png_bytep> rows(static_cast<std::size_t>(mask.height));
  for (int y = 0; y < mask.height; ++y) rows[static_cast<std::size_t>(y)] = packed.data() + y * row_bytes;
  auto fp = open_for_write(path);
  if (!encode(fp.get(), mask.width, mask.height, 1, PNG_COLOR_TYPE_GRAY, 6, rows))
    throw Error(ErrorKind::IoError, "PNG encode failed: " + path.string());
}

}  // namespace wsiset
