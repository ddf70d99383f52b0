#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "ssnet/depth_ace.hpp"
#include "ssnet/random.hpp"

using namespace ssnet;

namespace {

TensorF ramp(std::size_t n) {
  TensorF t({1, 1, n});
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<float>(i) / static_cast<float>(n - 1);
  return t;
}

}  // namespace

TEST_CASE("default percentiles are one percent at each end") {
  CHECK(kDefaultAcePercent == 1.0);
  const AceBounds b = percentile_bounds(ramp(101));
  CHECK(b.low_pct == 1.0);
  CHECK(b.high_pct == 1.0);
}

TEST_CASE("percentile bounds on a ramp") {
  // 101 samples 0, 0.01, ..., 1: ranks round(0.01*100) = 1 and round(0.99*100) = 99.
  const AceBounds b = percentile_bounds(ramp(101));
  CHECK(b.low == doctest::Approx(0.01));
  CHECK(b.high == doctest::Approx(0.99));
}

TEST_CASE("percentile bounds match the sort oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + rng.index(40), w = 1 + rng.index(40);
    TensorF d({1, h, w});
    for (auto& v : d.vec()) v = static_cast<float>(rng.index(256)) / 255.0f;
    const double lo = rng.uniform(0, 10), hi = rng.uniform(0, 10);
    const AceBounds b = percentile_bounds(d, lo, hi);
    CHECK(b.low == oracle::sorted_percentile(d.vec(), lo / 100.0));
    CHECK(b.high == std::max(b.low, oracle::sorted_percentile(d.vec(), 1.0 - hi / 100.0)));
  }
}

TEST_CASE("ace output is in [0,1] and monotone") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    TensorF d({1, 16, 16});
    for (auto& v : d.vec()) v = static_cast<float>(rng.uniform());
    const TensorF e = enhance_depth(d);
    std::vector<std::pair<float, float>> pairs;
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(e[i] >= 0.0f);
      CHECK(e[i] <= 1.0f);
      pairs.emplace_back(d[i], e[i]);
    }
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t i = 1; i < pairs.size(); ++i) CHECK(pairs[i].second >= pairs[i - 1].second);
  }
}

TEST_CASE("ace saturates at most the requested fraction plus ties") {
  Rng rng(23);
  TensorF d({1, 50, 40});
  for (auto& v : d.vec()) v = static_cast<float>(rng.uniform());
  const AceBounds b = percentile_bounds(d, 2.0, 3.0);
  const TensorF e = ace(d, b);
  std::size_t zeros = 0, ones = 0, tie_lo = 0, tie_hi = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    zeros += e[i] == 0.0f;
    ones += e[i] == 1.0f;
    tie_lo += d[i] == b.low;
    tie_hi += d[i] == b.high;
  }
  const double n = static_cast<double>(d.size());
  CHECK(zeros <= static_cast<std::size_t>(0.02 * n) + tie_lo + 1);
  CHECK(ones <= static_cast<std::size_t>(0.03 * n) + tie_hi + 1);
}

TEST_CASE("zero percentiles on a full-range image are the identity") {
  Rng rng(24);
  TensorF d({1, 10, 10});
  for (auto& v : d.vec()) v = static_cast<float>(rng.uniform());
  d[0] = 0.0f;
  d[1] = 1.0f;
  const TensorF e = enhance_depth(d, 0.0, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(e[i] - d[i]) <= 1e-7f);
}

TEST_CASE("three-pixel stretch and the constant image") {
  const TensorF d({1, 1, 3}, std::vector<float>{0.4f, 0.5f, 0.6f});
  const TensorF e = ace(d, AceBounds{0.4f, 0.6f, 0, 0});
  CHECK(e[0] == 0.0f);
  CHECK(e[1] == doctest::Approx(0.5));
  CHECK(e[2] == 1.0f);
  const TensorF c = enhance_depth(TensorF({1, 4, 4}, 0.3f));
  for (float v : c.data()) CHECK(v == 0.5f);
}

TEST_CASE("ace rejects bad input") {
  CHECK_THROWS(percentile_bounds(TensorF({2, 3, 3}), 1, 1));
  CHECK_THROWS(percentile_bounds(TensorF({1, 3, 3}), -1, 1));
  CHECK_THROWS(percentile_bounds(TensorF({1, 3, 3}), 1, 50));
}
