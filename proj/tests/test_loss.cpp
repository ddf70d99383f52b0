#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ssnet/loss.hpp"

using namespace ssnet;

namespace {

// Local SSIM from an explicit 11x11 window sum at every pixel.
double ssim_term(const TensorD& P, const TensorD& G) {
  const long H = static_cast<long>(P.dim(1)), W = static_cast<long>(P.dim(2));
  double win[11][11], norm = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      win[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2 * 1.5 * 1.5));
      norm += win[i][j];
    }
  double total = 0;
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double mp = 0, mg = 0, pp = 0, gg = 0, pg = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const long yy = y + i - 5, xx = x + j - 5;
          if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
          const double w = win[i][j] / norm, p = P[yy * W + xx], g = G[yy * W + xx];
          mp += w * p;
          mg += w * g;
          pp += w * p * p;
          gg += w * g * g;
          pg += w * p * g;
        }
      const double c1 = 1e-4, c2 = 9e-4;
      const double sp = pp - mp * mp, sg = gg - mg * mg, spg = pg - mp * mg;
      total += (2 * mp * mg + c1) * (2 * spg + c2) / ((mp * mp + mg * mg + c1) * (sp + sg + c2));
    }
  return 1 - total / static_cast<double>(H * W);
}

}  // namespace

TEST_CASE("SSIM window taps") {
  const auto g = ssim_window_1d();
  REQUIRE(g.size() == 11);
  double s = 0;
  for (double v : g) s += v;
  CHECK(s == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 11; ++i) CHECK(g[i] == doctest::Approx(g[10 - i]));
  CHECK(g[5] / g[6] == doctest::Approx(std::exp(1 / 4.5)));
}

TEST_CASE("loss terms against direct formulas") {
  Rng rng(91);
  const TensorD P = rng.uniform_tensor<double>({1, 14, 17}, 0.01, 0.99);
  TensorD G({1, 14, 17});
  for (auto& v : G.vec()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  const auto r = hybrid_loss(P, G);

  double bce = 0, inter = 0, sp = 0, sg = 0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    bce -= G[i] * std::log(P[i]) + (1 - G[i]) * std::log(1 - P[i]);
    inter += P[i] * G[i];
    sp += P[i];
    sg += G[i];
  }
  CHECK(r.bce == doctest::Approx(bce / P.size()).epsilon(1e-12));
  CHECK(r.iou == doctest::Approx(1 - (inter + 1) / (sp + sg - inter + 1)).epsilon(1e-12));
  CHECK(r.ssim == doctest::Approx(ssim_term(P, G)).epsilon(1e-10));
  CHECK(r.loss == doctest::Approx(r.bce + r.ssim + r.iou));
}

TEST_CASE("perfect prediction") {
  Rng rng(92);
  TensorD G({1, 12, 12});
  for (auto& v : G.vec()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  const auto r = hybrid_loss(G, G);
  CHECK(r.bce < 1e-6);
  CHECK(std::abs(r.ssim) < 1e-12);
  CHECK(std::abs(r.iou) < 1e-12);
}

TEST_CASE("loss gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(100 + seed);
    TensorD P = rng.uniform_tensor<double>({1, 8, 13}, 0.05, 0.95);
    TensorD G({1, 8, 13});
    for (auto& v : G.vec()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    const auto r = hybrid_loss(P, G);
    const TensorD num = oracle::numeric_grad(P, [&] { return hybrid_loss(P, G).loss; });
    CHECK(oracle::max_rel_error(r.grad, num) < 1e-6);
  }
}

TEST_CASE("float and double agree and shapes are checked") {
  Rng rng(93);
  const TensorD P = rng.uniform_tensor<double>({1, 9, 9}, 0.1, 0.9);
  const TensorD G = rng.uniform_tensor<double>({1, 9, 9}, 0, 1);
  CHECK(hybrid_loss(P.cast<float>(), G.cast<float>()).loss == doctest::Approx(hybrid_loss(P, G).loss).epsilon(1e-5));
  CHECK_THROWS_AS(hybrid_loss(P, TensorD({1, 9, 8})), ShapeError);
  CHECK_THROWS_AS(hybrid_loss(TensorD({2, 3, 3}), TensorD({2, 3, 3})), ShapeError);
}
