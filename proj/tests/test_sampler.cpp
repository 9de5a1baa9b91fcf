#include "fixtures.hpp"
#include "wsiset/patch.hpp"
#include "wsiset/resample.hpp"
#include "wsiset/rng.hpp"
#include "wsiset/sampler.hpp"

#include <doctest.h>

#include <set>

using namespace wsiset;
using fixture::error_kind;
using fixture::TempDir;

namespace {

// In-memory slide geometry with a mask painted by `tissue(x_um, y_um)`.
struct Scene {
  Slide slide;
  TissueMask mask;
};

Scene scene(int size_px, double mpp, const std::function<bool(double, double)>& tissue, int mask_px = 200) {
  Scene s;
  s.slide = fixture::skeleton("scene", size_px, 1, mpp);
  s.slide.metadata = {{"organ", "lung"}, {"provider", "p"}, {"extra", "dropped"}};
  const double side_um = size_px * mpp;
  s.mask.mask = Raster8(mask_px, mask_px, 1);
  s.mask.mpp = {side_um / mask_px, side_um / mask_px};
  s.mask.width_um = s.mask.height_um = side_um;
  for (int y = 0; y < mask_px; ++y)
    for (int x = 0; x < mask_px; ++x)
      s.mask.mask(x, y) = tissue((x + 0.5) * s.mask.mpp.x, (y + 0.5) * s.mask.mpp.y);
  return s;
}

SampleSpec random_spec(int n, double tau = 0.5) {
  SampleSpec spec;
  spec.patches_per_slide = n;
  spec.tissue_tau = tau;
  spec.seed = 42;
  return spec;
}

PatchRecord record_for(const std::string& slide, int index, const std::string& organ) {
  PatchRecord r;
  r.slide_id = slide;
  r.index = index;
  r.metadata["organ"] = organ;
  return r;
}

}  // namespace

TEST_CASE("random sampling on a disk slide") {
  const Scene s = scene(2048, 0.390625, [](double x, double y) { return std::hypot(x - 400, y - 400) < 330; });
  const auto recs = random_patches(s.slide, s.mask, random_spec(500));
  REQUIRE(recs.size() == 500);
  for (const auto& r : recs) {
    CHECK(r.tissue_fraction >= 0.5);
    CHECK(tissue_fraction(s.mask, {r.x0_um, r.y0_um, 200, 200}) == r.tissue_fraction);
    CHECK(r.x0_um >= 0);
    CHECK(r.x0_um + 200 <= 800);
    CHECK(r.metadata.count("organ") == 1);
    CHECK(r.metadata.count("extra") == 0);
  }
  CHECK(recs[17].index == 17);
}

TEST_CASE("random sampling is a pure function of seed and slide id") {
  Scene s = scene(2048, 0.390625, [](double x, double) { return x < 500; });
  const auto a = random_patches(s.slide, s.mask, random_spec(50));
  const auto b = random_patches(s.slide, s.mask, random_spec(50));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x0_um == b[i].x0_um);
    CHECK(a[i].y0_um == b[i].y0_um);
  }
  s.slide.id = "other";
  const auto c = random_patches(s.slide, s.mask, random_spec(50));
  CHECK(c[0].x0_um != a[0].x0_um);
}

TEST_CASE("random sampling gives up on background") {
  const Scene s = scene(2048, 0.390625, [](double, double) { return false; });
  CHECK(error_kind([&] { random_patches(s.slide, s.mask, random_spec(10)); }) == ErrorKind::InsufficientTissue);
}

TEST_CASE("grid candidate counts follow the floor formula") {
  const Scene s = scene(2048, 0.390625, [](double, double) { return true; });
  SampleSpec spec;
  spec.mode = SampleMode::Grid;
  spec.scale_um = 200;
  spec.tissue_tau = 0.0;
  spec.stride_um = 200;
  CHECK(grid_patches(s.slide, s.mask, spec).size() == 16);
  spec.stride_um = 100;
  const auto g = grid_patches(s.slide, s.mask, spec);
  CHECK(g.size() == 49);
  CHECK(g[1].x0_um == 100);
  CHECK(g[7].y0_um == 100);
  for (double extent : {150.0, 200.0, 799.0, 800.0, 1234.5})
    for (double stride : {37.0, 100.0, 200.0}) {
      const int n = grid_count(extent, 200, stride);
      CHECK(n == (extent < 200 ? 0 : static_cast<int>(std::floor((extent - 200) / stride)) + 1));
    }
}

TEST_CASE("tau 1 on a half-tissue slide keeps fully covered cells") {
  const Scene s = scene(2048, 0.390625, [](double x, double) { return x < 400; });
  SampleSpec spec;
  spec.mode = SampleMode::Grid;
  spec.stride_um = 100;
  spec.tissue_tau = 1.0;
  const auto g = grid_patches(s.slide, s.mask, spec);
  // Analytic coverage of [x, x+200) by [0, 400) is 1 exactly when x + 200 <= 400.
  CHECK(g.size() == 3 * 7);
  for (const auto& r : g) CHECK(r.x0_um + 200 <= 400);
}

TEST_CASE("sample spec validation") {
  SampleSpec spec;
  spec.mode = SampleMode::Grid;
  spec.stride_um = 250;
  CHECK(error_kind([&] { spec.validate(); }) == ErrorKind::InvalidConfig);
  spec.stride_um = 100;
  CHECK_NOTHROW(spec.validate());
  spec.tissue_tau = 1.5;
  CHECK(error_kind([&] { spec.validate(); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("polygon coverage against analytic areas") {
  const PolygonAnnotation square({{{100, 100}, {300, 100}, {300, 300}, {100, 300}}});
  CHECK(square.coverage({150, 150, 100, 100}) == 1.0);
  CHECK(square.coverage({0, 0, 50, 50}) == 0.0);
  CHECK(square.coverage({200, 150, 200, 100}) == doctest::Approx(0.5).epsilon(1.0 / 64));
  // Even-odd fill: an inner ring punches a hole.
  const PolygonAnnotation ring({{{0, 0}, {400, 0}, {400, 400}, {0, 400}}, {{100, 100}, {300, 100}, {300, 300}, {100, 300}}});
  CHECK(ring.coverage({150, 150, 100, 100}) == 0.0);
  CHECK(ring.coverage({0, 0, 400, 400}) == doctest::Approx(0.75).epsilon(1.0 / 64));
}

TEST_CASE("camelyon labels") {
  Slide tumor = fixture::skeleton("t", 1024, 1, 0.390625);
  tumor.metadata["slide_type"] = "tumor";
  Slide normal = tumor;
  normal.metadata["slide_type"] = "normal";
  const PolygonAnnotation lesion({{{0, 0}, {200, 0}, {200, 400}, {0, 400}}});
  PatchRecord inside, half;
  inside.x0_um = 0, inside.y0_um = 100, inside.scale_um = 200;
  half.x0_um = 100, half.y0_um = 100, half.scale_um = 200;
  CHECK(assign_label_camelyon(inside, tumor, &lesion) == CamelyonLabel::Tumor);
  CHECK(assign_label_camelyon(half, tumor, &lesion, 1.0) == CamelyonLabel::Reject);
  CHECK(assign_label_camelyon(half, tumor, &lesion, 0.5) == CamelyonLabel::Tumor);
  CHECK(assign_label_camelyon(half, normal, nullptr) == CamelyonLabel::Normal);
  CHECK(error_kind([&] { assign_label_camelyon(inside, tumor, nullptr); }) == ErrorKind::MissingAnnotation);
}

TEST_CASE("mask co-cropping") {
  TempDir tmp("mask");
  Raster8 labels(1024, 1024, 1);
  for (int y = 0; y < 1024; ++y)
    for (int x = 0; x < 1024; ++x) labels(x, y) = y < 512 ? 3 : (x < 512 ? 1 : 4);
  for (int y = 1000; y < 1008; ++y)
    for (int x = 1000; x < 1008; ++x) labels(x, y) = 7;
  write_pyramid(tmp / "m", fixture::skeleton("m", 1024, 1, 0.390625), {labels});
  const Slide m = open_slide((tmp / "m").string());

  PatchRecord r;
  r.scale_um = 100;
  r.out_px = 64;
  const MaskPatch uniform = co_crop_mask(m, r);
  CHECK((uniform.mask.data == 3).all());
  CHECK(uniform.histogram[3] == 64 * 64);

  r.x0_um = 150, r.y0_um = 250;  // straddles x = 200 um inside the lower half
  const MaskPatch split = co_crop_mask(m, r);
  const double n = 64.0 * 64.0;
  CHECK(std::fabs(split.histogram[1] / n - 0.5) <= 0.01);
  CHECK(std::fabs(split.histogram[4] / n - 0.5) <= 0.01);

  r.x0_um = 300, r.y0_um = 300;
  CHECK(error_kind([&] { co_crop_mask(m, r); }) == ErrorKind::IllegalLabel);
}

TEST_CASE("tiny subset arithmetic") {
  const std::vector<std::string> organs{"a", "b", "c", "d", "e", "f"};
  std::vector<PatchRecord> recs;
  for (const auto& o : organs)
    for (int s = 0; s < 510; ++s)
      for (int i = 0; i < 22; ++i) recs.push_back(record_for(o + std::to_string(s), i, o));
  const auto tiny = tiny_subset(recs, organs, 500, 20, 1);
  CHECK(tiny.size() == 60000);
  std::set<std::string> slides;
  for (const auto& r : tiny) slides.insert(r.slide_id);
  CHECK(slides.size() == 3000);
  CHECK(tiny_subset(recs, organs, 1, 1, 1).size() == 6);
  const auto again = tiny_subset(recs, organs, 500, 20, 1);
  CHECK(again.front().slide_id == tiny.front().slide_id);
  CHECK(again.back().index == tiny.back().index);

  std::vector<PatchRecord> few;
  for (int s = 0; s < 400; ++s) few.push_back(record_for("x" + std::to_string(s), 0, "x"));
  CHECK(error_kind([&] { tiny_subset(few, {"x"}, 500, 1, 0); }) == ErrorKind::InsufficientSlides);
}

TEST_CASE("normalized patch extraction") {
  TempDir tmp("extract");
  Stream rng(4);
  Raster8 base(1024, 1024, 3);
  for (Eigen::Index i = 0; i < base.data.size(); ++i) base.data[i] = static_cast<std::uint8_t>(rng.below(256));
  write_pyramid(tmp / "a", fixture::skeleton("a", 1024, 1, 0.390625), {base});
  const Slide a = open_slide((tmp / "a").string());
  const Raster8 p = extract_normalized_patch(a, 100 * 0.390625, 50 * 0.390625, 200, 512);
  CHECK(p == crop(base, 100, 50, 512, 512));
  CHECK(error_kind([&] { extract_normalized_patch(a, 300, 0, 200, 512); }) == ErrorKind::OutOfBounds);

  write_pyramid(tmp / "b", fixture::skeleton("b", 1024, 1, 0.25), {base});
  const Slide b = open_slide((tmp / "b").string());
  const PatchWindow w = plan_patch(b, 10, 20, 200, 512);
  CHECK(w.extent == 800);
  CHECK(w.x == 40);
  CHECK(w.y == 80);
  const Raster8 q = extract_normalized_patch(b, 10, 20, 200, 512);
  CHECK(q.width == 512);
  CHECK(q == bicubic_resize(crop(base, 40, 80, 800, 800), 512, 512));
}
