#include "wsiset/synth.hpp"

#include "wsiset/error.hpp"
#include "wsiset/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace wsiset {
namespace fs = std::filesystem;

namespace {

struct Ellipse {
  double cx, cy, rx, ry;  // fractions of the slide side
  bool contains(double u, double v) const {
    const double a = (u - cx) / rx, b = (v - cy) / ry;
    return a * a + b * b <= 1.0;
  }
};

std::vector<Ellipse> tissue_layout(Stream& rng) {
  std::vector<Ellipse> shapes{{rng.uniform(0.42, 0.58), rng.uniform(0.42, 0.58), rng.uniform(0.30, 0.38),
                               rng.uniform(0.30, 0.38)}};
  if (rng.bernoulli(0.5)) shapes.push_back({rng.uniform(0.1, 0.25), rng.uniform(0.1, 0.25), 0.08, 0.08});
  return shapes;
}

bool in_tissue(const std::vector<Ellipse>& shapes, double u, double v) {
  for (const auto& e : shapes)
    if (e.contains(u, v)) return true;
  return false;
}

Raster8 render_slide(int size, const std::vector<Ellipse>& shapes, Stream& rng) {
  Raster8 img(size, size, 3);
  const int tint = static_cast<int>(rng.below(30));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      const int n = static_cast<int>(rng.below(6));
      if (in_tissue(shapes, u, v)) {
        // Nuclei-like speckle on a pink stroma.
        const bool dark = ((x / 6) * 7 + (y / 6) * 13 + n) % 23 == 0;
        img(x, y, 0) = static_cast<std::uint8_t>(dark ? 90 + n : 205 - tint + n);
        img(x, y, 1) = static_cast<std::uint8_t>(dark ? 60 + n : 120 + n);
        img(x, y, 2) = static_cast<std::uint8_t>(dark ? 140 + n : 175 + n);
      } else {
        for (int c = 0; c < 3; ++c) img(x, y, c) = static_cast<std::uint8_t>(236 + n);
      }
    }
  }
  return img;
}

// Gleason-like labels: sectors of the main ellipse, 0 outside tissue.
Raster8 render_mask(int size, const std::vector<Ellipse>& shapes, int grade) {
  Raster8 mask(size, size, 1);
  const Ellipse& main = shapes.front();
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      std::uint8_t label = 0;
      if (in_tissue(shapes, u, v)) {
        const double angle = std::atan2(v - main.cy, u - main.cx) + M_PI;
        const int sector = static_cast<int>(angle / (2 * M_PI) * 4) % 4;
        label = static_cast<std::uint8_t>(sector == 0 ? 1 : sector == 1 ? 2 : std::min(5, 2 + grade / 2 + sector - 2));
      }
      mask(x, y, 0) = label;
    }
  }
  return mask;
}

// Box averaging would blend label values, so masks use the block's top-left
// sample instead.
Raster8 subsample(const Raster8& img, int factor) {
  const int w = (img.width + factor - 1) / factor, h = (img.height + factor - 1) / factor;
  Raster8 out(w, h, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) out(x, y, c) = img(x * factor, y * factor, c);
  return out;
}

Slide pyramid_skeleton(const std::string& id, int size, int levels, double mpp) {
  Slide s;
  s.id = id;
  for (int i = 0; i < levels; ++i) {
    PyramidLevel lv;
    lv.index = i;
    lv.downsample = std::pow(4.0, i);
    lv.mpp = {mpp * lv.downsample, mpp * lv.downsample};
    lv.width = lv.height = (size + static_cast<int>(lv.downsample) - 1) / static_cast<int>(lv.downsample);
    s.levels.push_back(lv);
  }
  return s;
}

template <class Down>
std::vector<Raster8> build_levels(Raster8 base, int levels, Down down) {
  std::vector<Raster8> out{std::move(base)};
  for (int i = 1; i < levels; ++i) out.push_back(down(out.back(), 4));
  return out;
}

}  // namespace

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Ptcga: return "ptcga";
    case SynthKind::Camelyon: return "camelyon";
    case SynthKind::Panda: return "panda";
  }
  return "?";
}

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "ptcga") return SynthKind::Ptcga;
  if (s == "camelyon") return SynthKind::Camelyon;
  if (s == "panda") return SynthKind::Panda;
  throw Error(ErrorKind::InvalidConfig, "unknown synthetic corpus kind '" + s + "'");
}

Raster8 box_downsample(const Raster8& img, int factor) {
  const int w = (img.width + factor - 1) / factor, h = (img.height + factor - 1) / factor;
  Raster8 out(w, h, img.channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x1 = std::min(img.width, (x + 1) * factor), y1 = std::min(img.height, (y + 1) * factor);
      for (int c = 0; c < img.channels; ++c) {
        int sum = 0;
        for (int yy = y * factor; yy < y1; ++yy)
          for (int xx = x * factor; xx < x1; ++xx) sum += img(xx, yy, c);
        const int n = (x1 - x * factor) * (y1 - y * factor);
        out(x, y, c) = static_cast<std::uint8_t>((sum + n / 2) / n);
      }
    }
  }
  return out;
}

std::vector<fs::path> synthesize_corpus(const fs::path& dir, const SynthOptions& opt) {
  if (opt.slides < 1 || opt.size < 16 || opt.levels < 1 || !(opt.mpp > 0) || opt.organs.empty())
    throw Error(ErrorKind::InvalidConfig, "invalid synthetic corpus options");
  std::vector<fs::path> roots;
  for (int i = 0; i < opt.slides; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04d", to_string(opt.kind).c_str(), i);
    Stream rng(derive_key(opt.seed, std::string(id)));
    const auto shapes = tissue_layout(rng);
    Slide slide = pyramid_skeleton(id, opt.size, opt.levels, opt.mpp);
    slide.metadata["provider"] = "synthetic";
    const fs::path root = dir / id;

    switch (opt.kind) {
      case SynthKind::Ptcga:
        slide.metadata["organ"] = opt.organs[static_cast<std::size_t>(i) % opt.organs.size()];
        break;
      case SynthKind::Camelyon: {
        slide.metadata["organ"] = "lymph node";
        slide.metadata["origin"] = i % 4 == 3 ? "test" : "train";
        const bool tumor = i % 2 == 1;
        slide.metadata["slide_type"] = tumor ? "tumor" : "normal";
        if (tumor) {
          // Square lesion centred on the main ellipse, in microns.
          const double side_um = opt.size * opt.mpp;
          const double cx = shapes.front().cx * side_um, cy = shapes.front().cy * side_um;
          const double r = 0.18 * side_um;
          nlohmann::json doc = {{"polygons", {{{cx - r, cy - r}, {cx + r, cy - r}, {cx + r, cy + r}, {cx - r, cy + r}}}}};
          fs::create_directories(root);
          std::ofstream(root / "annotation.json") << doc.dump() << '\n';
          slide.annotation_ref = "annotation.json";
        }
        break;
      }
      case SynthKind::Panda: {
        const int grade = static_cast<int>(i % 6);
        slide.metadata["organ"] = "prostate";
        slide.metadata["isup"] = std::to_string(grade);
        slide.metadata["provider"] = i % 3 == 2 ? "karolinska" : "radboud";
        slide.annotation_ref = "mask";
        Slide mask = pyramid_skeleton(std::string(id) + "-mask", opt.size, opt.levels, opt.mpp);
        write_pyramid(root / "mask", mask, build_levels(render_mask(opt.size, shapes, grade), opt.levels, subsample));
        break;
      }
    }
    write_pyramid(root, slide, build_levels(render_slide(opt.size, shapes, rng), opt.levels, box_downsample));
    roots.push_back(root);
  }
  return roots;
}

}  // namespace wsiset
