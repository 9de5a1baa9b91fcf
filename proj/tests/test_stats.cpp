#include "oracles.hpp"
#include "wsiset/rng.hpp"
#include "wsiset/stats.hpp"

#include <doctest.h>

using namespace wsiset;

namespace {

Raster8 random_image(Stream& rng, int max_side = 24) {
  const int w = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side)));
  const int h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side)));
  Raster8 img(w, h, 3);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

}  // namespace

TEST_CASE("constant and zero images") {
  const ChannelStats zero = finalize(update(ChannelMoments{}, Raster8(5, 4, 3)));
  CHECK((zero.mean == 0.0).all());
  CHECK((zero.std == 0.0).all());
  const ChannelStats c = finalize(update(ChannelMoments{}, Raster8(7, 3, 3, 51)));
  CHECK((c.mean == 0.2).all());
  CHECK((c.std == 0.0).all());
}

TEST_CASE("two pixels 0 and 1 give mean and std one half") {
  RasterD img(2, 1, 3);
  img(1, 0, 0) = img(1, 0, 1) = img(1, 0, 2) = 1.0;
  const ChannelStats s = finalize(update(ChannelMoments{}, img));
  CHECK((s.mean == 0.5).all());
  CHECK((s.std == 0.5).all());
}

TEST_CASE("single sample is degenerate; empty accumulator throws") {
  ChannelMoments one;
  one.push(Eigen::Array3d(0.1, 0.2, 0.3));
  const ChannelStats s = finalize(one);
  CHECK(s.degenerate);
  CHECK((s.std == 0.0).all());
  CHECK_THROWS_AS(finalize(ChannelMoments{}), Error);
  CHECK_THROWS_AS(update(ChannelMoments{}, Raster8(2, 2, 1)), Error);
}

TEST_CASE("streaming matches the two-pass computation") {
  Stream rng(31);
  std::vector<Raster8> images;
  ChannelMoments acc;
  for (int i = 0; i < 200; ++i) {
    images.push_back(random_image(rng));
    acc = update(acc, images.back());
  }
  const ChannelStats s = finalize(acc);
  const auto want = oracle::two_pass(images);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::fabs(s.mean[c] - want.mean[c]) <= 1e-6);
    CHECK(std::fabs(s.std[c] - want.std[c]) <= 1e-6);
  }
}

TEST_CASE("8-bit update equals pixel-by-pixel Welford") {
  Stream rng(2);
  const Raster8 img = random_image(rng, 40);
  ChannelMoments welford;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      welford.push(Eigen::Array3d(img(x, y, 0), img(x, y, 1), img(x, y, 2)) / 255.0);
  const ChannelMoments block = update(ChannelMoments{}, img);
  CHECK(block.count == welford.count);
  CHECK((block.mean - welford.mean).abs().maxCoeff() <= 1e-12);
  CHECK((block.m2 - welford.m2).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("merge identities") {
  Stream rng(4);
  const ChannelMoments a = update(ChannelMoments{}, random_image(rng));
  const ChannelMoments b = update(ChannelMoments{}, random_image(rng));
  const ChannelMoments ae = merge(a, ChannelMoments{});
  CHECK(ae.count == a.count);
  CHECK((ae.mean == a.mean).all());
  CHECK((merge(ChannelMoments{}, a).m2 == a.m2).all());
  const ChannelMoments ab = merge(a, b), ba = merge(b, a);
  CHECK((ab.mean - ba.mean).abs().maxCoeff() <= 1e-12);
  CHECK((ab.m2 - ba.m2).abs().maxCoeff() <= 1e-12 * std::max(1.0, ab.m2.maxCoeff()));
}

TEST_CASE("chunked merges equal a single stream") {
  Stream rng(6);
  std::vector<Raster8> images;
  for (int i = 0; i < 120; ++i) images.push_back(random_image(rng));
  ChannelMoments single;
  for (const auto& img : images) single = update(single, img);
  const ChannelStats want = finalize(single);
  for (int k : {2, 3, 7, 120}) {
    std::vector<ChannelMoments> chunks(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < images.size(); ++i) chunks[i % k] = update(chunks[i % k], images[i]);
    ChannelMoments folded;
    for (const auto& c : chunks) folded = merge(folded, c);
    const ChannelStats got = finalize(folded);
    CHECK((got.mean - want.mean).abs().maxCoeff() <= 1e-9);
    CHECK((got.std - want.std).abs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("per-image-mean mode") {
  Raster8 dark(4, 4, 3, 0), bright(2, 2, 3, 255);
  const ChannelStats s = finalize(update_per_image_mean(update_per_image_mean(ChannelMoments{}, dark), bright));
  CHECK((s.mean == 0.5).all());
  CHECK((s.std == 0.5).all());
}

TEST_CASE("reference constants") {
  CHECK(kPtcga200ReferenceMean[0] == 0.7184);
  CHECK(kPtcga200ReferenceStd[2] == 0.0352);
}
