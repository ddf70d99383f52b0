#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ssnet/priors.hpp"
#include "ssnet/random.hpp"

using namespace ssnet;

namespace {

TensorF random_8bit(Rng& rng, std::size_t h, std::size_t w, int levels = 256) {
  TensorF t({1, h, w});
  for (auto& v : t.vec()) v = static_cast<float>(rng.index(static_cast<std::size_t>(levels))) / 255.0f;
  return t;
}

std::vector<int> levels_of(const TensorF& t) {
  std::vector<int> l;
  for (float v : t.data()) l.push_back(static_cast<int>(std::lround(v * 255.0f)));
  return l;
}

}  // namespace

TEST_CASE("intensity levels") {
  CHECK(intensity_level(0.0f) == 0);
  CHECK(intensity_level(1.0f) == 255);
  CHECK(intensity_level(128.0f / 255.0f) == 128);
  CHECK(intensity_level(-3.0f) == 0);
  CHECK(intensity_level(7.0f) == 255);
}

TEST_CASE("otsu matches the exhaustive sweep") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t h = 2 + rng.index(30), w = 2 + rng.index(30);
    const TensorF img = random_8bit(rng, h, w, trial % 3 == 0 ? 7 : 256);
    const OtsuResult r = otsu_threshold(img);
    CHECK(r.level == oracle::otsu_sweep(levels_of(img)));
  }
}

TEST_CASE("otsu on a bimodal image separates the modes") {
  TensorF img({1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) img[i] = i < 10 ? 40.0f / 255.0f : 200.0f / 255.0f;
  const OtsuResult r = otsu_threshold(img);
  // Every level in [40, 199] gives the same split; the lowest wins.
  CHECK(r.level == 40);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(r.front[i] == (i < 10 ? 0.0f : 1.0f));
    CHECK(r.back[i] == 1.0f - r.front[i]);
  }
}

TEST_CASE("otsu on a constant image marks everything front") {
  const OtsuResult r = otsu_threshold(TensorF({1, 3, 3}, 0.5f));
  CHECK(r.level == -1);
  for (float v : r.front.data()) CHECK(v == 1.0f);
  for (float v : r.back.data()) CHECK(v == 0.0f);
}

TEST_CASE("front and back masks are complementary") {
  Rng rng(32);
  const TensorF img = random_8bit(rng, 17, 13);
  const OtsuResult r = otsu_threshold(img);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(r.front[i] + r.back[i] == 1.0f);
}

TEST_CASE("morphological gradient matches the window oracle") {
  Rng rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t h = 1 + rng.index(20), w = 1 + rng.index(20);
    const TensorF img = random_8bit(rng, h, w);
    CHECK(morphological_gradient(img) == oracle::morph_gradient(img));
  }
}

TEST_CASE("morphological gradient of a constant is zero, of a step is a band") {
  const TensorF flat = morphological_gradient(TensorF({1, 5, 6}, 0.7f));
  for (float v : flat.data()) CHECK(v == 0.0f);
  TensorF step({1, 3, 6});
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 3; x < 6; ++x) step.at(0, y, x) = 1.0f;
  const TensorF g = morphological_gradient(step);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 6; ++x) CHECK(g.at(0, y, x) == ((x == 2 || x == 3) ? 1.0f : 0.0f));
}

TEST_CASE("rgb contrast sums the per-channel gradients") {
  Rng rng(34);
  TensorF rgb({3, 8, 9});
  for (auto& v : rgb.vec()) v = static_cast<float>(rng.index(256)) / 255.0f;
  const TensorF c = rgb_contrast(rgb);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 9; ++x) {
      float want = 0;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        TensorF plane({1, 8, 9});
        for (std::size_t i = 0; i < 72; ++i) plane[i] = rgb[ch * 72 + i];
        want += oracle::morph_gradient(plane).at(0, y, x);
      }
      CHECK(c.at(0, y, x) == doctest::Approx(want));
    }
  CHECK_THROWS_AS(rgb_contrast(TensorF({2, 4, 4})), ShapeError);
}

TEST_CASE("center mask values") {
  const TensorF m = center_mask(5, 5);
  // sigma = 1.5, corner distance^2 = 8
  CHECK(m.at(0, 2, 2) == 1.0f);
  CHECK(m.at(0, 0, 0) == doctest::Approx(std::exp(-8.0 / 4.5)));
  CHECK(m.at(0, 4, 4) == m.at(0, 0, 0));
  const TensorF r = center_mask(6, 10);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 10; ++x) {
      CHECK(r.at(0, y, x) > 0.0f);
      CHECK(r.at(0, y, x) <= 1.0f);
      CHECK(r.at(0, y, x) == r.at(0, 5 - y, 9 - x));
    }
}

TEST_CASE("compute_priors assembles the three priors") {
  Rng rng(35);
  TensorF rgb({3, 12, 16});
  for (auto& v : rgb.vec()) v = static_cast<float>(rng.uniform());
  const TensorF depth = random_8bit(rng, 12, 16);
  const PriorSet p = compute_priors(rgb, depth);
  CHECK(p.S1 == otsu_threshold(depth).front);
  CHECK(p.S3 == center_mask(12, 16));
  CHECK(p.C_y == morphological_gradient(depth));
  float lo = 1, hi = 0;
  for (float v : p.S2.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0f);
  CHECK(hi == 1.0f);
  CHECK_THROWS_AS(compute_priors(rgb, TensorF({1, 12, 15})), ShapeError);
}
