// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed here.
// Exits non-zero if any criterion fails.

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wsiset/augment.hpp"
#include "wsiset/compile.hpp"
#include "wsiset/resample.hpp"
#include "wsiset/slide.hpp"
#include "wsiset/split.hpp"
#include "wsiset/stats.hpp"
#include "wsiset/synth.hpp"
#include "wsiset/tissue.hpp"
#include "wsiset/vit.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace wsiset;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

// Runs one criterion. The body returns an empty string on success or a
// description of the first violation.
void criterion(const std::string& name, const std::function<std::string()>& body) {
  const auto t0 = Clock::now();
  std::string why;
  try {
    why = body();
  } catch (const std::exception& e) {
    why = std::string("exception: ") + e.what();
  }
  const double s = seconds_since(t0);
  if (why.empty()) {
    std::printf("PASS  %-44s (%.2f s)\n", name.c_str(), s);
  } else {
    ++failures;
    std::printf("FAIL  %-44s (%.2f s) %s\n", name.c_str(), s, why.c_str());
  }
  std::fflush(stdout);
}

std::string str(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RasterD random_rgb(Stream& rng, int w, int h) {
  RasterD img(w, h, 3);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = rng.uniform();
  return img;
}

Raster8 random_image8(Stream& rng) {
  Raster8 img(1 + static_cast<int>(rng.below(32)), 1 + static_cast<int>(rng.below(32)), 3);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// Merges a list of accumulators by a randomly shaped binary tree.
ChannelMoments random_tree(std::vector<ChannelMoments> parts, Stream& rng) {
  while (parts.size() > 1) {
    const std::size_t i = rng.below(parts.size() - 1);
    parts[i] = merge(parts[i], parts[i + 1]);
    parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(i) + 1);
  }
  return parts.front();
}

std::string resolution_table() {
  const double crops[] = {512, 393, 287, 197, 98};
  const double want[] = {0.52, 0.40, 0.29, 0.20, 0.10};
  for (int i = 0; i < 5; ++i) {
    const double got = std::round(effective_mpp(0.390625, crops[i], 384) * 100.0) / 100.0;
    if (got != want[i]) return "crop " + str(crops[i]) + " gives " + str(got);
  }
  return {};
}

std::string extent_arithmetic() {
  if (physical_extent_px(200, 0.390625) != 512) return "200 um extent";
  if (physical_extent_px(400, 0.390625) != 1024) return "400 um extent";
  for (auto kind : {DatasetKind::Ptcga200, DatasetKind::Pcam200, DatasetKind::SegPanda200}) {
    const CompileConfig cfg = preset_config(kind);
    if (cfg.sampling.scale_um / cfg.sampling.out_px != 0.390625) return std::string(to_string(kind)) + " mpp";
  }
  return {};
}

std::string feature_maps() {
  if (feature_map_size(1024, 16) != 64) return "1024/16";
  if (feature_map_size(1024, 32) != 32) return "1024/32";
  return {};
}

std::string retile_inverse() {
  Stream rng(101);
  for (int trial = 0; trial < 10000; ++trial) {
    const int gh = 1 + static_cast<int>(rng.below(24));
    const int gw = 1 + static_cast<int>(rng.below(24));
    const int hidden = 1 + static_cast<int>(rng.below(48));
    const bool cls = rng.bernoulli(0.5);
    const TokenGrid g = TokenGrid::make(gh, gw, hidden, cls);
    RowMatrix<double> seq(g.seq_len, hidden);
    for (Eigen::Index i = 0; i < seq.size(); ++i) seq.data()[i] = rng.uniform(-1, 1);
    const auto head = cls ? std::optional<RowMatrix<double>>(seq.topRows(1)) : std::nullopt;
    if (flatten(retile<double>(seq, g), head) != seq)
      return "shape " + std::to_string(gh) + "x" + std::to_string(gw) + "x" + std::to_string(hidden);
  }
  return {};
}

std::string pos_embed_geometry() {
  Stream rng(7);
  PosEmbed<double> pe;
  pe.grid_h = pe.grid_w = 14;
  pe.table.resize(197, 384);
  for (Eigen::Index i = 0; i < pe.table.size(); ++i) pe.table.data()[i] = rng.uniform(-1, 1);
  const double same = (resize_pos_embed(pe, 14, 14).table - pe.table).cwiseAbs().maxCoeff();
  if (same > 1e-6) return "same-size drift " + str(same);
  const auto big = resize_pos_embed(pe, 24, 24);
  if (big.rows() != 577) return "rows " + std::to_string(big.rows());
  if (big.table.row(0) != pe.table.row(0)) return "CLS row changed";
  const auto z = zero_pos_embed(pe);
  if (!z.table.isZero(0) || zero_pos_embed(z).table != z.table || z.rows() != pe.rows() || z.hidden() != pe.hidden())
    return "zero init";
  return {};
}

std::string lr_rule() {
  const double peak = lr_at(1000, 10000, 1000, 5e-4, 4096);
  if (std::fabs(peak - 8e-3) > 1e-12) return "peak " + str(peak);
  const long long total = 200'000'000, warm = 20'000'000;
  const double at = lr_at(warm, total, warm, 5e-4, 4096);
  const double before = lr_at(warm - 1, total, warm, 5e-4, 4096);
  const double after = lr_at(warm + 1, total, warm, 5e-4, 4096);
  if (std::fabs(at - before) > 1e-9 || std::fabs(after - at) > 1e-9) return "jump at warmup boundary";
  if (lr_at(0, 10000, 1000, 5e-4, 4096) != 0.0) return "start not 0";
  if (std::fabs(lr_at(10000, 10000, 1000, 5e-4, 4096)) > 1e-18) return "end not 0";
  return {};
}

std::string synthetic_compile() {
  fixture::TempDir dir("acceptance-compile");
  SynthOptions so;
  so.slides = 30;
  so.seed = 30;
  const auto t_synth = Clock::now();
  synthesize_corpus(dir / "corpus", so);
  std::printf("      synthesized 30 slides of %d px in %.1f s\n", so.size, seconds_since(t_synth));

  const std::array<double, 3> fractions{0.8, 0.1, 0.1};
  const int per_slide = 50;
  CompileConfig cfg = parse_config({{"preset", "ptcga200"},
                                    {"name", "synthetic"},
                                    {"corpus", (dir / "corpus").string()},
                                    {"seed", 1},
                                    {"sampling", {{"patches_per_slide", per_slide}}},
                                    {"split", {{"fractions", fractions}}},
                                    {"labels",
                                     {{"classes",
                                       {{{"name", "breast"}}, {{"name", "colon"}}, {{"name", "kidney"}}, {{"name", "lung"}}}}}}});

  // Expected counts by floor-then-largest-remainder, computed independently.
  std::array<int, 3> slides_want{};
  std::array<double, 3> rem{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    slides_want[i] = static_cast<int>(std::floor(fractions[i] * 30));
    rem[i] = fractions[i] * 30 - slides_want[i];
    assigned += slides_want[i];
  }
  while (assigned < 30) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    ++slides_want[best];
    rem[best] = -1;
    ++assigned;
  }

  std::string reference;
  double total = 0.0, worst = 0.0;
  int run = 0;
  for (int jobs : {1, 1, 4, 16}) {
    cfg.jobs = jobs;
    cfg.out = dir / ("out" + std::to_string(run++));
    const auto t0 = Clock::now();
    const CompileResult r = compile(cfg);
    const double s = seconds_since(t0);
    total += s;
    worst = std::max(worst, s);
    std::printf("      compile --jobs %-2d %.1f s\n", jobs, s);
    const std::string bytes = slurp(r.manifest_path);
    if (reference.empty()) {
      reference = bytes;
      const char* names[] = {"train", "val", "test"};
      for (int i = 0; i < 3; ++i) {
        const auto& sum = r.manifest.summary.at(names[i]);
        if (sum.slides != static_cast<std::uint64_t>(slides_want[i]) ||
            sum.records != static_cast<std::uint64_t>(slides_want[i] * per_slide))
          return std::string(names[i]) + " has " + std::to_string(sum.records) + " records over " +
                 std::to_string(sum.slides) + " slides";
      }
      std::map<std::string, std::set<Split>> splits_of;
      for (const auto& rec : r.manifest.records) splits_of[rec.record.slide_id].insert(rec.record.split);
      for (const auto& [id, s] : splits_of)
        if (s.size() != 1) return "slide " + id + " in two splits";
    } else if (bytes != reference) {
      return "manifest differs at --jobs " + std::to_string(jobs);
    }
    fs::remove_all(cfg.out);
  }
  std::printf("      4 compiles, %.1f s total, slowest %.1f s\n", total, worst);
  if (worst >= 60.0) return "a compile took " + str(worst) + " s";
  return {};
}

std::string stratified_and_balanced() {
  std::vector<SlideInfo> slides;
  for (int g = 0; g < 6; ++g)
    for (int i = 0; i < 100; ++i) slides.push_back({"p" + std::to_string(g) + "_" + std::to_string(i), {{"isup", std::to_string(g)}}});
  SplitPlan plan;
  plan.fractions = {0.7, 0.15, 0.15};
  plan.seed = 600;
  const SplitMap m = stratified_isup_split(slides, plan);
  std::map<std::string, std::map<Split, int>> counts;
  for (const auto& s : slides) ++counts[s.metadata.at("isup")][m.at(s.id)];
  const double targets[] = {70, 15, 15};
  const Split splits[] = {Split::Train, Split::Val, Split::Test};
  for (const auto& [grade, c] : counts)
    for (int k = 0; k < 3; ++k) {
      const int got = c.count(splits[k]) ? c.at(splits[k]) : 0;
      if (std::fabs(got - targets[k]) > 1.0) return "grade " + grade + " off target";
    }

  Stream rng(3);
  std::vector<PatchRecord> records;
  for (int label = 0; label < 4; ++label) {
    const int n = 50 + static_cast<int>(rng.below(200));
    for (int i = 0; i < n; ++i) {
      PatchRecord r;
      r.slide_id = "s" + std::to_string(rng.below(20));
      r.index = i;
      r.label = label;
      records.push_back(r);
    }
  }
  rng.shuffle(records);
  std::map<int, int> kept;
  for (const auto& r : rebalance_classes(records, 9)) ++kept[*r.label];
  std::set<int> sizes;
  for (const auto& [label, n] : kept) sizes.insert(n);
  if (kept.size() != 4 || sizes.size() != 1) return "rebalanced classes are unequal";
  return {};
}

std::string streaming_stats() {
  Stream rng(1000);
  std::vector<Raster8> images;
  std::vector<ChannelMoments> parts;
  ChannelMoments acc;
  for (int i = 0; i < 1000; ++i) {
    images.push_back(random_image8(rng));
    acc = update(acc, images.back());
    parts.push_back(update(ChannelMoments{}, images.back()));
  }
  const ChannelStats got = finalize(acc);
  const auto want = oracle::two_pass(images);
  for (int c = 0; c < 3; ++c)
    if (std::fabs(got.mean[c] - want.mean[c]) > 1e-6 || std::fabs(got.std[c] - want.std[c]) > 1e-6)
      return "channel " + std::to_string(c) + " differs from two-pass";
  for (int t = 0; t < 20; ++t) {
    const ChannelStats tree = finalize(random_tree(parts, rng));
    if ((tree.mean - got.mean).abs().maxCoeff() > 1e-9 || (tree.std - got.std).abs().maxCoeff() > 1e-9)
      return "merge tree " + std::to_string(t) + " differs";
  }
  return {};
}

std::string resampling() {
  Stream rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    const int sw = 1 + static_cast<int>(rng.below(12)), sh = 1 + static_cast<int>(rng.below(12));
    const int dw = 1 + static_cast<int>(rng.below(24)), dh = 1 + static_cast<int>(rng.below(24));
    const RasterD img = random_rgb(rng, sw, sh);
    const double err = (bicubic_resize(img, dw, dh).data - oracle::bicubic(img, dw, dh).data).abs().maxCoeff();
    if (err > 1e-4) return "bicubic error " + str(err);
  }
  for (int trial = 0; trial < 1000; ++trial) {
    Histogram256 h{};
    const int sparsity = static_cast<int>(rng.below(4));
    for (auto& b : h)
      if (sparsity == 0 || rng.below(static_cast<std::uint64_t>(sparsity) * 8) == 0) b = rng.below(5000);
    h[rng.below(256)] += 1;
    const auto want = oracle::otsu(h);
    const OtsuResult got = otsu_threshold(h);
    if (got.threshold != want.threshold || got.degenerate != want.degenerate)
      return "otsu histogram " + std::to_string(trial);
  }
  const RasterD flat(40, 30, 3, 0.3125);
  const RasterD noise = random_rgb(rng, 128, 128);
  for (int trial = 0; trial < 20; ++trial) {
    const double sigma = rng.uniform(0.1, 2.0);
    if ((gaussian_blur(flat, sigma).data != flat.data).any()) return "constant image changed";
    const RasterD out = gaussian_blur(noise, sigma);
    for (int c = 0; c < 3; ++c) {
      const double drift =
          std::fabs(out.plane(c).block(16, 16, 96, 96).mean() - noise.plane(c).block(16, 16, 96, 96).mean());
      if (drift > 1e-3) return "interior mean drift " + str(drift);
    }
  }
  return {};
}

std::string augmentation() {
  Stream rng(55);
  AugmentConfig quiet;
  quiet.jitter.p = quiet.blur_p = quiet.hflip_p = quiet.vflip_p = 0.0;
  quiet.ablate.insert(std::string(kOpRandomResizedCrop));
  quiet.mean = Eigen::Array3d(0.7, 0.5, 0.7);
  quiet.std = Eigen::Array3d(0.2, 0.3, 0.1);
  const RasterD img = random_rgb(rng, 48, 48);
  if ((apply_train<double>(img, std::nullopt, quiet, AugRng{1, 0}).image.data !=
       normalize(img, quiet.mean, quiet.std).data)
          .any())
    return "probability-zero pipeline is not normalize-only";

  AugmentConfig flips = quiet;
  flips.mean.setZero();
  flips.std.setOnes();
  flips.hflip_p = 1.0;
  const RasterD once = apply_train<double>(img, std::nullopt, flips, AugRng{2, 0}).image;
  if ((apply_train<double>(once, std::nullopt, flips, AugRng{3, 0}).image.data != img.data).any())
    return "double flip is not the identity";

  AugmentConfig seg;
  seg.segmentation_mode = true;
  seg.seg_crop_px = 24;
  for (int trial = 0; trial < 500; ++trial) {
    const RasterD im = random_rgb(rng, 40, 36);
    Raster8 mask(40, 36, 1);
    std::set<int> before;
    const int k = 1 + static_cast<int>(rng.below(5));
    for (Eigen::Index i = 0; i < mask.data.size(); ++i) {
      mask.data[i] = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(k)) * 2);
      before.insert(mask.data[i]);
    }
    const auto r = apply_train<double>(im, mask, seg, AugRng{static_cast<std::uint64_t>(trial), 1});
    for (Eigen::Index i = 0; i < r.mask->data.size(); ++i)
      if (!before.count(r.mask->data[i])) return "mask label outside the source set";
  }

  AugmentConfig full;
  full.out_px = 32;
  full.ssl_mode = true;
  const std::string ops[] = {std::string(kOpRandomResizedCrop), std::string(kOpColorJitter),
                             std::string(kOpGrayscale),        std::string(kOpGaussianBlur),
                             std::string(kOpHFlip),            std::string(kOpVFlip)};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const AugTrace base = apply_train<double>(img, std::nullopt, full, AugRng{seed, 4}).trace;
    for (const auto& op : ops) {
      AugmentConfig ab = full;
      ab.ablate.insert(op);
      const AugTrace t = apply_train<double>(img, std::nullopt, ab, AugRng{seed, 4}).trace;
      const bool same = (op == kOpRandomResizedCrop || t.crop == base.crop) &&
                        (op == kOpColorJitter || t.jitter == base.jitter) &&
                        (op == kOpGrayscale || t.grayscale == base.grayscale) &&
                        (op == kOpGaussianBlur || t.blur == base.blur) && (op == kOpHFlip || t.hflip == base.hflip) &&
                        (op == kOpVFlip || t.vflip == base.vflip);
      if (!same) return "ablating " + op + " changed another op";
    }
  }
  return {};
}

}  // namespace

int main() {
  criterion("zoom-level resolution table (<1 s)", [] {
    const auto t0 = Clock::now();
    std::string why = resolution_table();
    if (why.empty() && seconds_since(t0) >= 1.0) why = "too slow";
    return why;
  });
  criterion("physical extent and preset mpp", extent_arithmetic);
  criterion("ViT feature map sizes", feature_maps);
  criterion("retile inverse, 10000 shapes (<10 s)", [] {
    const auto t0 = Clock::now();
    std::string why = retile_inverse();
    if (why.empty() && seconds_since(t0) >= 10.0) why = "too slow";
    return why;
  });
  criterion("positional embedding geometry", pos_embed_geometry);
  criterion("learning-rate rule", lr_rule);
  criterion("synthetic corpus compile (each <60 s)", synthetic_compile);
  criterion("ISUP-stratified split and rebalance", stratified_and_balanced);
  criterion("streaming stats and merge trees", streaming_stats);
  criterion("bicubic, Otsu and blur oracles", resampling);
  criterion("augmentation properties", augmentation);
  std::printf("%s: %d failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
