// Command-line front end: compile, split, stats, verify, augment, protocol,
// subset, synth.
//
// Exit codes: 0 ok, 1 verification findings, 2 usage or configuration error,
// 3 input/output or data error.

#include "wsiset/augment.hpp"
#include "wsiset/compile.hpp"
#include "wsiset/config.hpp"
#include "wsiset/error.hpp"
#include "wsiset/manifest.hpp"
#include "wsiset/png_io.hpp"
#include "wsiset/protocol.hpp"
#include "wsiset/resample.hpp"
#include "wsiset/sampler.hpp"
#include "wsiset/split.hpp"
#include "wsiset/synth.hpp"
#include "wsiset/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace wsiset;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::ConfigConflict:
    case ErrorKind::UnknownPreset:
    case ErrorKind::InvalidSchedule:
    case ErrorKind::OutOfRange:
    case ErrorKind::NotDivisible:
      return kExitUsage;
    default:
      return kExitIo;
  }
}

json stats_json(const ChannelStats& s) {
  return {{"mean", {s.mean[0], s.mean[1], s.mean[2]}}, {"std", {s.std[0], s.std[1], s.std[2]}}};
}

// Streams the train split's patch files, in record order.
std::pair<ChannelStats, ChannelStats> recompute_stats(const fs::path& manifest_path, const DatasetManifest& m) {
  ChannelMoments pixels, means;
  for (const auto& r : m.records) {
    if (r.record.split != Split::Train) continue;
    const Raster8 img = read_png(manifest_path.parent_path() / r.path);
    pixels = update(pixels, img);
    means = update_per_image_mean(means, img);
  }
  return {finalize(pixels), finalize(means)};
}

int run_compile(const fs::path& config, const std::optional<fs::path>& out, std::optional<std::uint64_t> seed,
                std::optional<int> jobs, bool emit_masks, bool force) {
  CompileConfig cfg = load_config(config);
  if (out) cfg.out = *out;
  if (seed) cfg.apply_seed(*seed);
  if (jobs) cfg.jobs = *jobs;
  if (emit_masks) cfg.emit_tissue_masks = true;
  const CompileResult r = compile(cfg, force);
  for (const auto& w : r.manifest.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& [split, s] : r.manifest.summary)
    std::cout << split << ": " << s.records << " records from " << s.slides << " slides\n";
  std::cout << "manifest: " << r.manifest_path.string() << '\n';
  return kExitOk;
}

int run_split(const fs::path& config, std::optional<std::uint64_t> seed) {
  CompileConfig cfg = load_config(config);
  if (seed) cfg.apply_seed(*seed);
  const Enrollment e = enroll(cfg);
  const SplitResult s = plan_splits(cfg, e.slides);
  for (const auto& w : e.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  write_split_csv(std::cout, s.assignment);
  return kExitOk;
}

int run_stats(const fs::path& manifest_path, bool per_image_mean, bool recompute) {
  const DatasetManifest m = read_manifest(manifest_path);
  std::optional<ChannelStats> pixels = m.pixel_stats, means = m.image_mean_stats;
  if (recompute || !pixels || !means) std::tie(pixels, means) = recompute_stats(manifest_path, m);
  const json doc = {{"dataset", m.name}, {"mode", per_image_mean ? "per_image_mean" : "per_pixel"},
                    {"stats", stats_json(per_image_mean ? *means : *pixels)}};
  std::cout << doc.dump(2) << '\n';
  return kExitOk;
}

int run_verify(const fs::path& manifest_path, bool hashes) {
  const VerifyReport report = verify(manifest_path, hashes);
  for (const auto& f : report.findings) std::cout << f.code << ": " << f.detail << '\n';
  std::cout << report.records_checked << " records checked, " << report.findings.size() << " findings\n";
  return report.ok() ? kExitOk : kExitFindings;
}

Raster8 denormalize(const RasterD& img, const Eigen::Array3d& mean, const Eigen::Array3d& std) {
  RasterD out = img;
  for (Eigen::Index i = 0; i < out.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = out.data[i * 3 + c] * std[c] + mean[c];
  return quantize(out);
}

void paste(Raster8& dst, const Raster8& tile, int x0) {
  for (int y = 0; y < tile.height; ++y)
    for (int x = 0; x < tile.width; ++x)
      for (int c = 0; c < 3; ++c) dst(x0 + x, y, c) = tile.channels == 1 ? tile(x, y, 0) : tile(x, y, c);
}

int run_augment(const fs::path& config, const fs::path& input, const std::optional<fs::path>& mask_path,
                const fs::path& out, int count, std::uint64_t seed) {
  const CompileConfig cfg = load_config(config);
  const Raster8 src = read_png(input);
  if (src.channels != 3) throw Error(ErrorKind::ChannelMismatch, input.string() + ": expected an RGB patch");
  std::optional<Raster8> mask;
  if (cfg.augment.segmentation_mode)
    mask = mask_path ? read_png(*mask_path) : Raster8(src.width, src.height, 1);
  const RasterD real = to_real<double>(src);

  // Before tile first, then `count` augmented draws.
  std::vector<Raster8> tiles;
  for (int i = 0; i < count; ++i) {
    const auto r = apply_train(real, mask, cfg.augment, AugRng{seed, static_cast<std::uint64_t>(i)});
    tiles.push_back(denormalize(r.image, cfg.augment.mean, cfg.augment.std));
  }
  const int side = tiles.empty() ? src.width : tiles.front().width;
  tiles.insert(tiles.begin(), bicubic_resize(src, side, side));
  Raster8 grid(side * static_cast<int>(tiles.size()), side, 3);
  for (std::size_t i = 0; i < tiles.size(); ++i) paste(grid, tiles[i], static_cast<int>(i) * side);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(out, grid);
  std::cout << "wrote " << out.string() << " (" << count << " augmented draws)\n";
  return kExitOk;
}

int run_protocol(const std::string& preset, bool list, const ProtocolOptions& opt) {
  if (list) {
    for (const auto& n : protocol_names()) std::cout << n << '\n';
    return kExitOk;
  }
  std::cout << protocol_document(preset, opt).dump(2) << '\n';
  return kExitOk;
}

struct SubsetArgs {
  fs::path manifest;
  fs::path out;
  std::string split = "train";
  std::optional<double> fraction;
  bool tiny = false;
  std::vector<std::string> organs;
  int slides_per_organ = 500;
  int patches_per_slide = 20;
  std::uint64_t seed = 0;
};

int run_subset(const SubsetArgs& a) {
  DatasetManifest m = read_manifest(a.manifest);
  const Split target = parse_split(a.split);
  std::vector<PatchRecord> pool;
  std::map<std::pair<std::string, std::int64_t>, ManifestRecord> by_key;
  for (const auto& r : m.records) {
    if (r.record.split != target) continue;
    pool.push_back(r.record);
    by_key[{r.record.slide_id, r.record.index}] = r;
  }
  const std::vector<PatchRecord> chosen =
      a.tiny ? tiny_subset(pool, a.organs, a.slides_per_organ, a.patches_per_slide, a.seed)
             : fraction_subset(pool, *a.fraction, a.seed);

  const fs::path src_dir = fs::absolute(a.manifest).parent_path();
  fs::path out = a.out;
  if (out.extension() != ".jsonl") out /= kManifestFile;
  const fs::path dst_dir = fs::absolute(out).parent_path();
  auto rebase = [&](ManifestRecord r) {
    r.path = fs::relative(src_dir / r.path, dst_dir).generic_string();
    return r;
  };
  std::vector<ManifestRecord> records;
  for (const auto& r : m.records)
    if (r.record.split != target) records.push_back(rebase(r));
  for (const auto& p : chosen) records.push_back(rebase(by_key.at({p.slide_id, p.index})));
  std::stable_sort(records.begin(), records.end(), [](const ManifestRecord& x, const ManifestRecord& y) {
    return std::tie(x.record.split, x.record.slide_id, x.record.index) <
           std::tie(y.record.split, y.record.slide_id, y.record.index);
  });
  m.records = std::move(records);
  m.summary = recount(m.records, m.class_names);
  m.pixel_stats.reset();
  m.image_mean_stats.reset();
  m.stats_pixels = 0;
  m.warnings.push_back(a.tiny ? "tiny subset of " + a.split + " (seed " + std::to_string(a.seed) + ")"
                              : "fraction " + std::to_string(*a.fraction) + " of " + a.split + " slides (seed " +
                                    std::to_string(a.seed) + ")");
  fs::create_directories(dst_dir);
  write_manifest(out, m);
  std::cout << "wrote " << out.string() << " with " << chosen.size() << " " << a.split << " records\n";
  return kExitOk;
}

int run_synth(const std::string& kind, const fs::path& out, int slides, int size, std::uint64_t seed) {
  SynthOptions opt;
  opt.kind = parse_synth_kind(kind);
  opt.slides = slides;
  opt.size = size;
  opt.seed = seed;
  const auto roots = synthesize_corpus(out, opt);
  std::cout << "wrote " << roots.size() << " slides under " << out.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build patch datasets from whole-slide image corpora"};
  app.require_subcommand(1);
  std::function<int()> action;

  fs::path config, out, manifest_path, input;
  std::optional<fs::path> out_opt, mask_path;
  std::optional<std::uint64_t> seed_opt;
  std::optional<int> jobs;
  bool emit_masks = false, force = false;
  auto* compile_cmd = app.add_subcommand("compile", "Compile a dataset from a corpus");
  compile_cmd->add_option("--config", config, "Compile config (JSON)")->required();
  compile_cmd->add_option("--out", out_opt, "Output root (overrides the config)");
  compile_cmd->add_option("--seed", seed_opt, "Seed (overrides the config)");
  compile_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  compile_cmd->add_flag("--emit-tissue-masks", emit_masks, "Write 1-bit tissue masks for audit");
  compile_cmd->add_flag("--force", force, "Replace an existing dataset directory");
  compile_cmd->callback([&] { action = [&] { return run_compile(config, out_opt, seed_opt, jobs, emit_masks, force); }; });

  auto* split_cmd = app.add_subcommand("split", "Print the slide split assignment as CSV");
  split_cmd->add_option("--config", config, "Compile config (JSON)")->required();
  split_cmd->add_option("--seed", seed_opt, "Seed (overrides the config)");
  split_cmd->callback([&] { action = [&] { return run_split(config, seed_opt); }; });

  bool per_image_mean = false, recompute = false;
  auto* stats_cmd = app.add_subcommand("stats", "Print train-split RGB mean and std");
  stats_cmd->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  stats_cmd->add_flag("--per-image-mean", per_image_mean, "Statistics over per-image means");
  stats_cmd->add_flag("--recompute", recompute, "Recompute from the patch files");
  stats_cmd->callback([&] { action = [&] { return run_stats(manifest_path, per_image_mean, recompute); }; });

  bool hashes = false;
  auto* verify_cmd = app.add_subcommand("verify", "Check a compiled dataset against its manifest");
  verify_cmd->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  verify_cmd->add_flag("--hash", hashes, "Also check content hashes");
  verify_cmd->callback([&] { action = [&] { return run_verify(manifest_path, hashes); }; });

  bool preview = false;
  int count = 8;
  std::uint64_t seed = 0;
  auto* augment_cmd = app.add_subcommand("augment", "Preview the training augmentation");
  augment_cmd->add_flag("--preview", preview, "Write a before/after grid")->required();
  augment_cmd->add_option("--config", config, "Compile config holding the augmentation block")->required();
  augment_cmd->add_option("--input", input, "Input patch (PNG)")->required()->check(CLI::ExistingFile);
  augment_cmd->add_option("--mask", mask_path, "Label mask for segmentation configs");
  augment_cmd->add_option("--out", out, "Output grid (PNG)")->required();
  augment_cmd->add_option("--count", count, "Augmented draws")->check(CLI::Range(1, 64));
  augment_cmd->add_option("--seed", seed, "Augmentation seed");
  augment_cmd->callback([&] { action = [&] { return run_augment(config, input, mask_path, out, count, seed); }; });

  std::string preset;
  bool list = false;
  ProtocolOptions popt;
  auto* protocol_cmd = app.add_subcommand("protocol", "Emit a training protocol preset as JSON");
  auto* preset_opt = protocol_cmd->add_option("--preset", preset, "Preset name");
  protocol_cmd->add_flag("--list", list, "List preset names")->excludes(preset_opt);
  protocol_cmd->add_option("--batch-size", popt.batch_size, "Pretraining batch size");
  protocol_cmd->add_option("--steps-per-epoch", popt.steps_per_epoch, "Steps per epoch (0 derives it)");
  protocol_cmd->add_option("--finetune-steps", popt.finetune_steps, "Fine-tuning iterations");
  protocol_cmd->add_option("--every", popt.every, "Schedule sampling stride in steps");
  protocol_cmd->callback([&] {
    if (!list && preset.empty()) throw CLI::RequiredError("--preset");
    action = [&] { return run_protocol(preset, list, popt); };
  });

  SubsetArgs sub;
  auto* subset_cmd = app.add_subcommand("subset", "Write a manifest restricted to a slide subset");
  subset_cmd->add_option("--manifest", sub.manifest, "Source manifest")->required();
  subset_cmd->add_option("--out", sub.out, "Output manifest file or directory")->required();
  subset_cmd->add_option("--split", sub.split, "Split to subsample")->check(CLI::IsMember({"train", "val", "test"}));
  auto* frac = subset_cmd->add_option("--fraction", sub.fraction, "Fraction of slides")->check(CLI::Range(0.0, 1.0));
  auto* tiny = subset_cmd->add_flag("--tiny", sub.tiny, "Fixed slides per organ and patches per slide");
  frac->excludes(tiny);
  subset_cmd->add_option("--organs", sub.organs, "Organs for --tiny")->delimiter(',');
  subset_cmd->add_option("--slides-per-organ", sub.slides_per_organ)->check(CLI::PositiveNumber);
  subset_cmd->add_option("--patches-per-slide", sub.patches_per_slide)->check(CLI::PositiveNumber);
  subset_cmd->add_option("--seed", sub.seed, "Subset seed");
  subset_cmd->callback([&] {
    if (!sub.tiny && !sub.fraction) throw CLI::ValidationError("subset", "one of --fraction or --tiny is required");
    if (sub.tiny && sub.organs.empty()) throw CLI::ValidationError("subset", "--tiny needs --organs");
    action = [&] { return run_subset(sub); };
  });

  std::string kind = "ptcga";
  int slides = 8, size = 2048;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic slide corpus");
  synth_cmd->add_option("--kind", kind, "ptcga, camelyon or panda")->check(CLI::IsMember({"ptcga", "camelyon", "panda"}));
  synth_cmd->add_option("--out", out, "Corpus directory")->required();
  synth_cmd->add_option("--slides", slides)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", size, "Level-0 side in pixels")->check(CLI::Range(16, 65536));
  synth_cmd->add_option("--seed", seed);
  synth_cmd->callback([&] { action = [&] { return run_synth(kind, out, slides, size, seed); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
}
