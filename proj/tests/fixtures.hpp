// Scratch directories and small synthetic slides for tests.
#pragma once

#include "wsiset/error.hpp"
#include "wsiset/slide.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unistd.h>

namespace fixture {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("wsiset-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Kind of the wsiset::Error thrown by `f`, if any.
inline std::optional<wsiset::ErrorKind> error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const wsiset::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// Single-level RGB raster painted by `paint(x, y)` returning a gray value.
inline wsiset::Raster8 paint_rgb(int w, int h, const std::function<std::uint8_t(int, int)>& paint) {
  wsiset::Raster8 img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img(x, y, c) = paint(x, y);
  return img;
}

// Slide skeleton with levels at downsamples 1, f, f^2, ... of a square base.
inline wsiset::Slide skeleton(const std::string& id, int size, int levels, double mpp, int factor = 4) {
  wsiset::Slide s;
  s.id = id;
  double ds = 1.0;
  for (int i = 0; i < levels; ++i, ds *= factor) {
    wsiset::PyramidLevel lv;
    lv.index = i;
    lv.downsample = ds;
    lv.mpp = {mpp * ds, mpp * ds};
    lv.width = lv.height = static_cast<int>((size + ds - 1) / ds);
    s.levels.push_back(lv);
  }
  return s;
}

}  // namespace fixture
