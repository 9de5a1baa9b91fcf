#include "wsiset/slide.hpp"

#include "wsiset/error.hpp"
#include "wsiset/png_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>

namespace wsiset {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMppTolerance = 0.01;

class PngPyramidReader final : public SlideReader {
 public:
  PngPyramidReader(fs::path root, std::vector<PyramidLevel> levels)
      : root_(std::move(root)), levels_(std::move(levels)), cache_(levels_.size()) {}

  std::shared_ptr<const Raster8> level_pixels(int level) const override {
    std::lock_guard lock(mutex_);
    auto& slot = cache_.at(static_cast<std::size_t>(level));
    if (!slot) {
      const auto& meta = levels_[static_cast<std::size_t>(level)];
      auto img = std::make_shared<Raster8>(read_png(root_ / meta.file));
      if (img->width != meta.width || img->height != meta.height)
        throw Error(ErrorKind::DecodeError, (root_ / meta.file).string() + ": raster size disagrees with metadata");
      slot = std::move(img);
    }
    return slot;
  }

 private:
  fs::path root_;
  std::vector<PyramidLevel> levels_;
  mutable std::mutex mutex_;
  mutable std::vector<std::shared_ptr<const Raster8>> cache_;
};

std::map<std::string, SlideOpener>& format_registry() {
  static std::map<std::string, SlideOpener> registry;
  return registry;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Slide parse_descriptor(const fs::path& json_path, const fs::path& root, const std::string& fallback_id,
                       const std::string& default_file = {}) {
  std::ifstream in(json_path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + json_path.string());
  Slide slide;
  try {
    const json doc = json::parse(in);
    slide.id = doc.value("id", fallback_id);
    if (doc.contains("metadata"))
      for (const auto& [k, v] : doc.at("metadata").items())
        slide.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    if (doc.contains("annotation") && !doc.at("annotation").is_null())
      slide.annotation_ref = doc.at("annotation").get<std::string>();
    int index = 0;
    for (const auto& lv : doc.at("levels")) {
      PyramidLevel level;
      level.index = index++;
      level.width = lv.at("width").get<int>();
      level.height = lv.at("height").get<int>();
      level.downsample = lv.value("downsample", 1.0);
      level.mpp.x = lv.at("mpp_x").get<double>();
      level.mpp.y = lv.at("mpp_y").get<double>();
      level.file = default_file.empty() ? lv.at("file").get<std::string>() : lv.value("file", default_file);
      slide.levels.push_back(level);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptMetadata, json_path.string() + ": " + e.what());
  }
  slide.root = root;
  slide.reader = std::make_shared<PngPyramidReader>(root, slide.levels);
  validate_slide(slide);
  return slide;
}

bool near(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

}  // namespace

void MppSpec::validate() const {
  if (!(x > 0.0) || !(y > 0.0)) throw Error(ErrorKind::CorruptMetadata, "mpp must be positive");
  if (std::abs(x - y) / x > kMppTolerance) throw Error(ErrorKind::CorruptMetadata, "pixels are not square within 1%");
}

const PyramidLevel& Slide::level(int i) const {
  if (i < 0 || i >= level_count())
    throw Error(ErrorKind::OutOfBounds, id + ": no level " + std::to_string(i));
  return levels[static_cast<std::size_t>(i)];
}

std::string Slide::meta(const std::string& key, const std::string& fallback) const {
  const auto it = metadata.find(key);
  return it == metadata.end() ? fallback : it->second;
}

void validate_slide(const Slide& slide) {
  if (slide.id.empty()) throw Error(ErrorKind::CorruptMetadata, "slide id is empty");
  if (slide.levels.empty()) throw Error(ErrorKind::CorruptMetadata, slide.id + ": no pyramid levels");
  const auto& base = slide.levels.front();
  base.mpp.validate();
  if (!near(base.downsample, 1.0, kMppTolerance))
    throw Error(ErrorKind::CorruptMetadata, slide.id + ": level 0 downsample must be 1");
  for (std::size_t i = 0; i < slide.levels.size(); ++i) {
    const auto& lv = slide.levels[i];
    if (lv.width < 1 || lv.height < 1)
      throw Error(ErrorKind::CorruptMetadata, slide.id + ": empty level " + std::to_string(i));
    lv.mpp.validate();
    if (i > 0 && !(lv.downsample > slide.levels[i - 1].downsample))
      throw Error(ErrorKind::CorruptMetadata, slide.id + ": downsample must increase with level");
    if (!near(lv.mpp.x, base.mpp.x * lv.downsample, kMppTolerance) ||
        !near(lv.mpp.y, base.mpp.y * lv.downsample, kMppTolerance))
      throw Error(ErrorKind::CorruptMetadata,
                  slide.id + ": level " + std::to_string(i) + " mpp contradicts its downsample");
  }
  if (const auto it = slide.metadata.find("slide_type"); it != slide.metadata.end())
    if (it->second != "tumor" && it->second != "normal")
      throw Error(ErrorKind::CorruptMetadata, slide.id + ": slide_type must be tumor or normal");
  if (const auto it = slide.metadata.find("origin"); it != slide.metadata.end())
    if (it->second != "train" && it->second != "test")
      throw Error(ErrorKind::CorruptMetadata, slide.id + ": origin must be train or test");
  if (const auto it = slide.metadata.find("isup"); it != slide.metadata.end()) {
    const auto& v = it->second;
    if (v.size() != 1 || v[0] < '0' || v[0] > '5')
      throw Error(ErrorKind::CorruptMetadata, slide.id + ": isup must be an integer grade 0-5");
  }
  for (const char* key : {"organ", "provider"})
    if (const auto it = slide.metadata.find(key); it != slide.metadata.end() && it->second.empty())
      throw Error(ErrorKind::CorruptMetadata, slide.id + ": empty " + key);
}

void register_slide_format(const std::string& extension, SlideOpener open) {
  std::lock_guard lock(registry_mutex());
  format_registry()[lower(extension)] = std::move(open);
}

Slide open_slide(const std::string& uri) {
  const fs::path path(uri);
  if (fs::is_directory(path)) {
    const fs::path descriptor = path / "slide.json";
    if (!fs::exists(descriptor)) throw Error(ErrorKind::UnknownFormat, uri + ": directory without slide.json");
    return parse_descriptor(descriptor, path, path.filename().string());
  }
  if (!fs::exists(path)) throw Error(ErrorKind::IoError, uri + ": no such file");
  const std::string ext = lower(path.extension().string());
  if (ext == ".json") return parse_descriptor(path, path.parent_path(), path.stem().string());
  if (ext == ".png") {
    const fs::path sidecar = fs::path(path).replace_extension(".json");
    if (!fs::exists(sidecar)) throw Error(ErrorKind::UnknownFormat, uri + ": plain image without sidecar");
    Slide slide = parse_descriptor(sidecar, path.parent_path(), path.stem().string(), path.filename().string());
    if (slide.level_count() != 1) throw Error(ErrorKind::CorruptMetadata, uri + ": sidecar must declare one level");
    return slide;
  }
  SlideOpener opener;
  {
    std::lock_guard lock(registry_mutex());
    const auto it = format_registry().find(ext);
    if (it != format_registry().end()) opener = it->second;
  }
  if (!opener) throw Error(ErrorKind::UnknownFormat, uri);
  Slide slide = opener(path);
  validate_slide(slide);
  return slide;
}

Raster8 read_region(const Slide& slide, int level, int x, int y, int w, int h) {
  const PyramidLevel& lv = slide.level(level);
  if (w < 1 || h < 1 || x < 0 || y < 0 || x > lv.width - w || y > lv.height - h)
    throw Error(ErrorKind::OutOfBounds, slide.id + ": region (" + std::to_string(x) + "," + std::to_string(y) + "," +
                                            std::to_string(w) + "," + std::to_string(h) + ") outside level " +
                                            std::to_string(level));
  if (!slide.reader) throw Error(ErrorKind::DecodeError, slide.id + ": slide has no reader");
  const auto pixels = slide.reader->level_pixels(level);
  return crop(*pixels, x, y, w, h);
}

LevelChoice level_for_mpp(const Slide& slide, double target_mpp) {
  const double limit = target_mpp * (1.0 + 1e-6);
  LevelChoice choice{0, slide.levels.front().mpp.x > limit};
  for (const auto& lv : slide.levels)
    if (lv.mpp.x <= limit) choice.level = lv.index;
  return choice;
}

int physical_extent_px(double scale_um, double mpp) {
  return std::max(1, static_cast<int>(std::lround(scale_um / mpp)));
}

void write_pyramid(const fs::path& dir, Slide slide, const std::vector<Raster8>& rasters) {
  fs::create_directories(dir);
  json doc;
  doc["id"] = slide.id;
  doc["metadata"] = json::object();
  for (const auto& [k, v] : slide.metadata) doc["metadata"][k] = v;
  if (slide.annotation_ref) doc["annotation"] = *slide.annotation_ref;
  doc["levels"] = json::array();
  for (std::size_t i = 0; i < slide.levels.size(); ++i) {
    auto& lv = slide.levels[i];
    lv.file = "level" + std::to_string(i) + ".png";
    lv.width = rasters.at(i).width;
    lv.height = rasters.at(i).height;
    write_png(dir / lv.file, rasters[i], 1);
    doc["levels"].push_back({{"width", lv.width},
                             {"height", lv.height},
                             {"downsample", lv.downsample},
                             {"mpp_x", lv.mpp.x},
                             {"mpp_y", lv.mpp.y},
                             {"file", lv.file}});
  }
  std::ofstream out(dir / "slide.json");
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + (dir / "slide.json").string());
  out << doc.dump(2) << '\n';
}

}  // namespace wsiset
