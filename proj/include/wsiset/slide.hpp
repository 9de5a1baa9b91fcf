#pragma once

#include "wsiset/raster.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wsiset {

/// Microns per pixel along each axis.
struct MppSpec {
  double x = 0.0;
  double y = 0.0;

  /// Throws CorruptMetadata unless both are positive and within 1% of each other.
  void validate() const;
};

struct PyramidLevel {
  int index = 0;
  int width = 0;
  int height = 0;
  double downsample = 1.0;
  MppSpec mpp;
  std::string file;  ///< raster path relative to the slide root
};

using Metadata = std::map<std::string, std::string>;

/// Decodes whole pyramid levels. Implementations must be safe to call
/// concurrently; any caching must not alter returned pixels.
class SlideReader {
 public:
  virtual ~SlideReader() = default;
  virtual std::shared_ptr<const Raster8> level_pixels(int level) const = 0;
};

/// Immutable after open. Copies share the reader.
struct Slide {
  std::string id;
  std::vector<PyramidLevel> levels;
  Metadata metadata;
  std::optional<std::string> annotation_ref;  ///< relative to `root`
  std::filesystem::path root;
  std::shared_ptr<const SlideReader> reader;

  const PyramidLevel& level(int i) const;
  int level_count() const { return static_cast<int>(levels.size()); }
  /// Physical extent of level 0 in microns.
  double width_um() const { return levels.front().width * levels.front().mpp.x; }
  double height_um() const { return levels.front().height * levels.front().mpp.y; }
  std::string meta(const std::string& key, const std::string& fallback = {}) const;
};

/// Opens a pyramid directory (`slide.json` + one PNG per level), a sidecar
/// JSON, or a plain PNG with a `<stem>.json` sidecar. Other extensions are
/// dispatched to registered readers.
Slide open_slide(const std::string& uri);

/// Extension point for vendor formats: `open` receives the uri and must return
/// a fully populated Slide. Keyed by lower-case file extension (".svs").
using SlideOpener = std::function<Slide(const std::filesystem::path&)>;
void register_slide_format(const std::string& extension, SlideOpener open);

/// Checks pyramid invariants and metadata values; throws CorruptMetadata.
void validate_slide(const Slide& slide);

/// Exact pixels of a level rectangle, no resampling.
Raster8 read_region(const Slide& slide, int level, int x, int y, int w, int h);

struct LevelChoice {
  int level = 0;
  bool upsample = false;  ///< even level 0 is coarser than requested
};

/// Coarsest level whose MPP does not exceed `target_mpp` (relative slack 1e-6).
LevelChoice level_for_mpp(const Slide& slide, double target_mpp);

/// round(scale_um / mpp), at least 1.
int physical_extent_px(double scale_um, double mpp);

/// Writes a pyramid directory: `slide.json` plus `level{i}.png` rasters. The
/// level entries' `file` fields are overwritten with the generated names.
void write_pyramid(const std::filesystem::path& dir, Slide slide, const std::vector<Raster8>& rasters);

}  // namespace wsiset
