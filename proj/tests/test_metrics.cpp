#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "ssnet/image_io.hpp"
#include "ssnet/metrics.hpp"

using namespace ssnet;
namespace fs = std::filesystem;

namespace {

TensorF random_map(Rng& rng, std::size_t h, std::size_t w) {
  TensorF t({1, h, w});
  for (auto& v : t.vec()) v = static_cast<float>(rng.index(256)) / 255.0f;
  return t;
}

// Per-threshold F-measure from an explicit confusion matrix.
double f_max_oracle(const TensorF& P, const TensorF& G) {
  double best = 0;
  for (int k = 0; k < 256; ++k) {
    const double t = k / 255.0;
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
      const bool p = P[i] > t, g = G[i] > 0.5f;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    double prec = tp + fp > 0 ? tp / (tp + fp) : (tp + fn == 0 ? 1.0 : 0.0);
    double rec = tp + fn > 0 ? tp / (tp + fn) : 1.0;
    const double f = (0.3 * prec + rec) > 0 ? 1.3 * prec * rec / (0.3 * prec + rec) : 0.0;
    best = std::max(best, f);
  }
  return best;
}

// Per-pixel enhanced alignment at one threshold.
double e_oracle(const TensorF& P, const TensorF& G, double t) {
  const std::size_t n = P.size();
  std::vector<double> fm(n), gt(n);
  double mf = 0, mg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fm[i] = P[i] > t ? 1.0 : 0.0;
    gt[i] = G[i] > 0.5f ? 1.0 : 0.0;
    mf += fm[i];
    mg += gt[i];
  }
  mf /= n;
  mg /= n;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double enhanced;
    if (mg == 0) {
      enhanced = 1 - fm[i];
    } else if (mg == 1) {
      enhanced = fm[i];
    } else {
      const double a = fm[i] - mf, b = gt[i] - mg;
      const double align = 2 * a * b / (a * a + b * b + 2.220446049250313e-16);
      enhanced = (align + 1) * (align + 1) / 4;
    }
    s += enhanced;
  }
  return s / n;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ssnet_test_metrics_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  return dir;
}

}  // namespace

TEST_CASE("mae") {
  Rng rng(101);
  const TensorF P = random_map(rng, 6, 7), G = oracle::random_binary(rng, 6, 7, 0.4);
  double s = 0;
  for (std::size_t i = 0; i < P.size(); ++i) s += std::abs(double(P[i]) - G[i]);
  CHECK(mae(P, G) == doctest::Approx(s / P.size()));
  CHECK(mae(P, G) == mae(G, P));
  CHECK(mae(G, G) == 0.0);
  TensorF inv = G;
  for (auto& v : inv.vec()) v = 1 - v;
  CHECK(mae(inv, G) == 1.0);
  CHECK_THROWS_AS(mae(P, TensorF({1, 6, 6})), ShapeError);
}

TEST_CASE("F-measure against the confusion-matrix oracle") {
  Rng rng(102);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t h = 1 + rng.index(6), w = 1 + rng.index(6);
    const TensorF P = random_map(rng, h, w), G = oracle::random_binary(rng, h, w, trial % 5 == 0 ? 0.0 : 0.4);
    CHECK(f_beta(P, G).f_max == doctest::Approx(f_max_oracle(P, G)).epsilon(1e-12));
  }
  const TensorF G = oracle::random_binary(rng, 4, 4, 0.5);
  CHECK(f_beta(G, G).f_max == doctest::Approx(1.0));
  TensorF inv = G;
  for (auto& v : inv.vec()) v = 1 - v;
  CHECK(f_beta(inv, G).f_max == 0.0);
}

TEST_CASE("PR points: 256 of them, recall non-increasing in the threshold") {
  Rng rng(103);
  const TensorF P = random_map(rng, 20, 20), G = oracle::random_binary(rng, 20, 20, 0.3);
  const auto r = f_beta(P, G);
  REQUIRE(r.pr.size() == 256);
  for (std::size_t k = 1; k < 256; ++k) CHECK(r.pr[k].recall <= r.pr[k - 1].recall);
  for (const auto& p : r.pr) {
    CHECK(p.precision >= 0);
    CHECK(p.precision <= 1);
  }
}

TEST_CASE("E-measure against the per-pixel oracle") {
  Rng rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 2 + rng.index(8), w = 2 + rng.index(8);
    const double p_on = trial % 7 == 0 ? 0.0 : (trial % 7 == 1 ? 1.0 : 0.35);
    const TensorF P = random_map(rng, h, w), G = oracle::random_binary(rng, h, w, p_on);
    const auto e = e_measure(P, G);
    double mx = 0, mean = 0;
    for (int k = 0; k < 256; ++k) {
      const double v = e_oracle(P, G, k / 255.0);
      CHECK(e.curve[k] == doctest::Approx(v).epsilon(1e-12));
      mx = std::max(mx, v);
      mean += v / 256;
    }
    CHECK(e.e_max == doctest::Approx(mx));
    CHECK(e.e_mean == doctest::Approx(mean));
  }
}

TEST_CASE("E-measure extremes") {
  Rng rng(105);
  const TensorF G = oracle::random_binary(rng, 10, 10, 0.3);
  CHECK(e_measure(G, G).e_max == doctest::Approx(1.0).epsilon(1e-12));
  TensorF inv = G;
  for (auto& v : inv.vec()) v = 1 - v;
  // Every threshold below 1 reproduces the complement (alignment -1, score 0);
  // the top threshold predicts nothing, which scores exactly 1/4.
  const auto e = e_measure(inv, G);
  CHECK(e.e_max == doctest::Approx(0.25));
  CHECK(e.e_mean == doctest::Approx(0.25 / 256));
}

TEST_CASE("S-measure special cases") {
  Rng rng(106);
  const TensorF P = random_map(rng, 9, 11);
  double mean = 0;
  for (float v : P.data()) mean += v;
  mean /= P.size();
  CHECK(s_measure(P, TensorF({1, 9, 11}, 0.0f)) == doctest::Approx(1 - mean));
  CHECK(s_measure(P, TensorF({1, 9, 11}, 1.0f)) == doctest::Approx(mean));
  for (int i = 0; i < 5; ++i) {
    const TensorF G = oracle::random_binary(rng, 8 + i, 12, 0.4);
    const double s = s_measure(G, G);
    CHECK(s >= 0.95);
    CHECK(s <= 1.0 + 1e-12);
  }
  const TensorF G = oracle::random_binary(rng, 12, 12, 0.4);
  const double good = s_measure(G, G);
  TensorF inv = G;
  for (auto& v : inv.vec()) v = 1 - v;
  CHECK(s_measure(inv, G) < good);
  CHECK(s_measure(inv, G) >= 0.0);
}

TEST_CASE("S-measure on a hand example") {
  // G: left half foreground on a 2x4 map. P equals 0.5 everywhere.
  TensorF G({1, 2, 4}, std::vector<float>{1, 1, 0, 0, 1, 1, 0, 0});
  TensorF P({1, 2, 4}, 0.5f);
  // Object: fg values 0.5, bg values 0.5, sd 0: 2*0.5/(0.25+1) = 0.8 each side.
  // Region: centroid x = 0.5 (0-based), split at column 1; y centroid 0.5, split at row 1.
  // Prediction is constant in every block, so alpha = 0. The two single-pixel
  // left blocks have beta = 0 and score 1; the 1x3 right blocks mix GT values,
  // beta > 0, score 0. Region = (1 + 0 + 1 + 0) weighted by area = 2/8.
  CHECK(s_measure(P, G) == doctest::Approx(0.5 * 0.8 + 0.5 * 0.25));
}

TEST_CASE("all metrics are invariant under joint flips") {
  Rng rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 3 + rng.index(12), w = 3 + rng.index(12);
    const TensorF P = random_map(rng, h, w), G = oracle::random_binary(rng, h, w, 0.35);
    for (auto flip : {oracle::hflip, oracle::vflip}) {
      const MetricReport a = evaluate(P, G), b = evaluate(flip(P), flip(G));
      CHECK(a.mae == doctest::Approx(b.mae).epsilon(1e-12));
      CHECK(a.f_beta_max == doctest::Approx(b.f_beta_max).epsilon(1e-12));
      CHECK(a.s_measure == doctest::Approx(b.s_measure).epsilon(1e-12));
      CHECK(a.e_measure_max == doctest::Approx(b.e_measure_max).epsilon(1e-12));
      CHECK(a.e_measure_mean == doctest::Approx(b.e_measure_mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("F and E maxima do not decrease as the prediction moves toward the truth") {
  Rng rng(108);
  for (int trial = 0; trial < 10; ++trial) {
    const TensorF P = random_map(rng, 10, 10), G = oracle::random_binary(rng, 10, 10, 0.4);
    double prev_f = -1, prev_e = -1;
    for (int step = 0; step <= 10; ++step) {
      const float lam = step / 10.0f;
      TensorF Q(P.shape());
      for (std::size_t i = 0; i < P.size(); ++i) Q[i] = (1 - lam) * P[i] + lam * G[i];
      const double f = f_beta(Q, G).f_max, e = e_measure(Q, G).e_max;
      CHECK(f >= prev_f - 1e-12);
      CHECK(e >= prev_e - 1e-12);
      prev_f = f;
      prev_e = e;
    }
  }
}

TEST_CASE("dataset evaluation averages per image and ignores file order") {
  Rng rng(109);
  const fs::path dir = scratch_dir("dataset");
  std::vector<MetricReport> per;
  for (int i = 0; i < 3; ++i) {
    const TensorF P = random_map(rng, 8, 9), G = oracle::random_binary(rng, 8, 9, 0.3);
    const std::string name = "img" + std::to_string(2 - i) + ".pgm";
    write_pnm(dir / "pred" / name, tensor_to_image(P));
    write_pnm(dir / "gt" / name, tensor_to_image(G));
    per.push_back(evaluate(image_to_tensor(tensor_to_image(P)), G));
  }
  const MetricReport r = evaluate_dataset(dir / "pred", dir / "gt");
  double mae_sum = 0, s_sum = 0, p0 = 0;
  for (const auto& m : per) {
    mae_sum += m.mae;
    s_sum += m.s_measure;
    p0 += m.pr[0].precision;
  }
  CHECK(r.mae == doctest::Approx(mae_sum / 3));
  CHECK(r.s_measure == doctest::Approx(s_sum / 3));
  CHECK(r.pr[0].precision == doctest::Approx(p0 / 3));

  fs::remove(dir / "pred" / "img1.pgm");
  CHECK_THROWS(evaluate_dataset(dir / "pred", dir / "gt"));
  fs::remove_all(dir);
}

TEST_CASE("JSON report formatting") {
  MetricReport r;
  r.mae = 0.1234567;
  r.f_beta_max = 1;
  r.pr.assign(256, PrPoint{0.5, 0.25});
  const std::string j = report_to_json(r);
  CHECK(j.find("\"mae\": 0.123457") != std::string::npos);
  CHECK(j.find("\"f_beta_max\": 1.000000") != std::string::npos);
  CHECK(j.find("[0.500000, 0.250000]") != std::string::npos);
}
