#include "wsiset/compile.hpp"

#include "wsiset/error.hpp"
#include "wsiset/parallel.hpp"
#include "wsiset/patch.hpp"
#include "wsiset/png_io.hpp"
#include "wsiset/sampler.hpp"
#include "wsiset/tissue.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace wsiset {
namespace fs = std::filesystem;

std::vector<Slide> open_corpus(const fs::path& corpus) {
  if (!fs::is_directory(corpus)) throw Error(ErrorKind::IoError, "corpus is not a directory: " + corpus.string());
  std::vector<fs::path> roots;
  for (auto it = fs::recursive_directory_iterator(corpus); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_directory()) continue;
    if (fs::exists(it->path() / "slide.json")) {
      roots.push_back(it->path());
      it.disable_recursion_pending();  // mask pyramids live inside slide directories
    }
  }
  std::vector<Slide> slides;
  slides.reserve(roots.size());
  for (const auto& r : roots) slides.push_back(open_slide(r.string()));
  std::sort(slides.begin(), slides.end(), [](const Slide& a, const Slide& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < slides.size(); ++i)
    if (slides[i].id == slides[i - 1].id) throw Error(ErrorKind::CorruptMetadata, "duplicate slide id " + slides[i].id);
  return slides;
}

bool passes_filters(const Slide& slide, const std::map<std::string, std::string>& filters) {
  for (const auto& [key, value] : filters)
    if (slide.meta(key) != value) return false;
  return true;
}

namespace {

std::map<std::string, int> organ_to_class(const CompileConfig& cfg) {
  std::map<std::string, int> out;
  for (std::size_t c = 0; c < cfg.classes.size(); ++c)
    for (const auto& organ : cfg.classes[c].organs) out[organ] = static_cast<int>(c);
  return out;
}

std::vector<SlideInfo> slide_infos(const std::vector<Slide>& slides) {
  std::vector<SlideInfo> infos;
  for (const auto& s : slides) infos.push_back({s.id, s.metadata});
  return infos;
}

/// Re-raises module errors with the slide id attached.
template <typename Fn>
auto with_slide_context(const std::string& id, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "slide " + id + ": " + e.what());
  }
}

fs::path annotation_path(const Slide& slide) {
  if (!slide.annotation_ref) throw Error(ErrorKind::MissingAnnotation, slide.id + ": no annotation reference");
  return slide.root / *slide.annotation_ref;
}

std::vector<PatchRecord> sample_slide(const CompileConfig& cfg, const Slide& slide,
                                      const std::map<std::string, int>& classes, const fs::path& dataset_dir) {
  const TissueMask mask = tissue_mask(slide, cfg.tissue);
  if (cfg.emit_tissue_masks) write_png_1bit(dataset_dir / "tissue_masks" / (slide.id + ".png"), mask.mask);
  std::vector<PatchRecord> records = cfg.sampling.mode == SampleMode::Random ? random_patches(slide, mask, cfg.sampling)
                                                                             : grid_patches(slide, mask, cfg.sampling);
  const auto names = cfg.class_names();
  switch (cfg.label_policy) {
    case LabelPolicy::Organ: {
      const int label = classes.at(slide.meta("organ"));
      for (auto& r : records) {
        r.label = label;
        r.label_name = names[static_cast<std::size_t>(label)];
      }
      break;
    }
    case LabelPolicy::Camelyon: {
      std::shared_ptr<const Annotation> annotation;
      if (slide.meta("slide_type") == "tumor" && slide.annotation_ref) annotation = load_annotation(annotation_path(slide));
      std::vector<PatchRecord> kept;
      for (auto& r : records) {
        const CamelyonLabel l = assign_label_camelyon(r, slide, annotation.get(), cfg.annotation_tau);
        if (l == CamelyonLabel::Reject) continue;
        r.label = l == CamelyonLabel::Tumor ? 1 : 0;
        r.label_name = names[static_cast<std::size_t>(*r.label)];
        kept.push_back(std::move(r));
      }
      records = std::move(kept);
      break;
    }
    case LabelPolicy::Mask:
      annotation_path(slide);  // fail early when the mask pyramid is missing
      break;
  }
  return records;
}

std::string patch_stem(const PatchRecord& r) { return r.slide_id + "_" + std::to_string(r.index); }

}  // namespace

Enrollment enroll(const CompileConfig& cfg) {
  Enrollment e;
  const auto classes = organ_to_class(cfg);
  for (auto& slide : open_corpus(cfg.corpus)) {
    if (!passes_filters(slide, cfg.filters)) continue;
    if (cfg.label_policy == LabelPolicy::Organ && !classes.count(slide.meta("organ"))) {
      e.warnings.push_back("skipped slide " + slide.id + ": organ '" + slide.meta("organ") + "' not in class map");
      continue;
    }
    e.slides.push_back(std::move(slide));
  }
  if (e.slides.empty()) throw Error(ErrorKind::EmptyCorpus, "no slides enrolled from " + cfg.corpus.string());
  return e;
}

SplitResult plan_splits(const CompileConfig& cfg, const std::vector<Slide>& slides) {
  return split_slides(slide_infos(slides), cfg.split);
}

CompileResult compile(const CompileConfig& cfg, bool overwrite) {
  cfg.validate();
  if (cfg.out.empty()) throw Error(ErrorKind::InvalidConfig, "output root is required");
  CompileResult result;
  result.dataset_dir = cfg.out / cfg.name;
  result.manifest_path = result.dataset_dir / kManifestFile;
  const fs::path& dir = result.dataset_dir;
  if (fs::exists(dir)) {
    if (!overwrite) throw Error(ErrorKind::IoError, dir.string() + " already exists");
    fs::remove_all(dir);
  }

  Enrollment enrolled = enroll(cfg);
  fs::create_directories(dir);
  try {
    if (cfg.emit_tissue_masks) fs::create_directories(dir / "tissue_masks");
    const auto classes = organ_to_class(cfg);
    const auto names = cfg.class_names();
    const auto& slides = enrolled.slides;

    // Sampling and labelling, one task per slide. Workers re-open slides so
    // decoded levels are released when a task ends.
    std::vector<std::vector<PatchRecord>> per_slide(slides.size());
    parallel_for(slides.size(), cfg.jobs, [&](std::size_t i) {
      per_slide[i] = with_slide_context(slides[i].id, [&] {
        const Slide fresh = open_slide(slides[i].root.string());
        return sample_slide(cfg, fresh, classes, dir);
      });
    });

    SplitResult split = plan_splits(cfg, slides);
    std::vector<PatchRecord> records;
    for (auto& group : per_slide)
      for (auto& r : group) {
        r.split = split.assignment.at(r.slide_id);
        records.push_back(std::move(r));
      }
    if (cfg.rebalance) records = rebalance_per_split(records, cfg.seed);

    DatasetManifest& m = result.manifest;
    m.name = cfg.name;
    m.kind = cfg.kind;
    m.scale_um = cfg.sampling.scale_um;
    m.out_px = cfg.sampling.out_px;
    m.mpp = cfg.sampling.scale_um / cfg.sampling.out_px;
    m.segmentation = cfg.label_policy == LabelPolicy::Mask;
    m.rebalanced = cfg.rebalance;
    m.tissue_tau = cfg.sampling.tissue_tau;
    m.class_names = names;
    m.seed = cfg.seed;
    m.config = config_identity(cfg);
    m.config_hash = config_hash(cfg);
    m.warnings = enrolled.warnings;
    m.warnings.insert(m.warnings.end(), split.warnings.begin(), split.warnings.end());

    m.records.resize(records.size());
    std::vector<std::string> dirs;
    for (std::size_t k = 0; k < records.size(); ++k) {
      const PatchRecord& r = records[k];
      std::string sub = std::string(to_string(r.split)) + "/";
      if (!m.segmentation) sub += r.label_name + "/";
      m.records[k].path = sub + patch_stem(r) + ".png";
      if (m.segmentation) records[k].mask_ref = sub + patch_stem(r) + "_mask.png";
      m.records[k].record = records[k];
      dirs.push_back(sub);
    }
    std::sort(dirs.begin(), dirs.end());
    dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());
    for (const auto& d : dirs) fs::create_directories(dir / d);

    // Pixel extraction, grouped by slide.
    std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end) in record order
    for (std::size_t k = 0; k < m.records.size();) {
      std::size_t e = k;
      while (e < m.records.size() && m.records[e].record.slide_id == m.records[k].record.slide_id) ++e;
      groups.emplace_back(k, e);
      k = e;
    }
    std::map<std::string, const Slide*> by_id;
    for (const auto& s : slides) by_id[s.id] = &s;
    std::vector<ChannelMoments> pixel_moments(m.records.size());
    std::vector<ChannelMoments> mean_moments(m.records.size());
    parallel_for(groups.size(), cfg.jobs, [&](std::size_t g) {
      const auto [begin, end] = groups[g];
      const std::string& id = m.records[begin].record.slide_id;
      with_slide_context(id, [&] {
        const Slide slide = open_slide(by_id.at(id)->root.string());
        std::optional<Slide> mask_slide;
        if (m.segmentation) mask_slide = open_slide(annotation_path(slide).string());
        for (std::size_t k = begin; k < end; ++k) {
          ManifestRecord& mr = m.records[k];
          const PatchRecord& r = mr.record;
          const Raster8 patch = extract_normalized_patch(slide, r.x0_um, r.y0_um, r.scale_um, r.out_px);
          write_png(dir / mr.path, patch);
          mr.sha256 = sha256_file(dir / mr.path);
          if (mask_slide) {
            const MaskPatch mp = co_crop_mask(*mask_slide, r);
            write_png(dir / *r.mask_ref, mp.mask);
            mr.mask_sha256 = sha256_file(dir / *r.mask_ref);
          }
          if (r.split == Split::Train) {
            pixel_moments[k] = update(ChannelMoments{}, patch);
            mean_moments[k] = update_per_image_mean(ChannelMoments{}, patch);
          }
        }
        return 0;
      });
    });

    ChannelMoments pixels;
    ChannelMoments means;
    for (std::size_t k = 0; k < m.records.size(); ++k) {
      pixels = merge(pixels, pixel_moments[k]);
      means = merge(means, mean_moments[k]);
    }
    if (pixels.count > 0) {
      m.pixel_stats = finalize(pixels);
      m.image_mean_stats = finalize(means);
    }
    m.stats_pixels = pixels.count;
    m.summary = recount(m.records, m.class_names);
    write_manifest(result.manifest_path, m);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw;
  }
  return result;
}

}  // namespace wsiset
