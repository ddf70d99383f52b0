#include "ssnet/depth_ace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ssnet {

namespace {

void check_depth(const TensorF& depth) {
  if (depth.empty()) throw ShapeError("depth map is empty");
  if (depth.rank() != 3 || depth.dim(0) != 1) {
    throw ShapeError("depth map must be [1,H,W], got " + shape_str(depth.shape()));
  }
}

void check_pct(double pct, const char* which) {
  if (!(pct >= 0.0 && pct < 50.0)) {
    throw std::invalid_argument(std::string(which) + " percentage must lie in [0, 50)");
  }
}

std::size_t rank_index(double fraction, std::size_t n) {
  const double pos = std::round(fraction * static_cast<double>(n - 1));
  return static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n - 1)));
}

}  // namespace

AceBounds percentile_bounds(const TensorF& depth, double low_pct, double high_pct) {
  check_depth(depth);
  check_pct(low_pct, "low");
  check_pct(high_pct, "high");
  std::vector<float> sorted(depth.data().begin(), depth.data().end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t lo = rank_index(low_pct / 100.0, n);
  const std::size_t hi = std::max(lo, rank_index(1.0 - high_pct / 100.0, n));
  return AceBounds{sorted[lo], sorted[hi], low_pct, high_pct};
}

TensorF ace(const TensorF& depth, const AceBounds& bounds) {
  check_depth(depth);
  if (!(bounds.low <= bounds.high)) throw std::invalid_argument("ace: low bound exceeds high bound");
  TensorF out(depth.shape());
  if (bounds.high == bounds.low) {
    for (auto& v : out.vec()) v = 0.5f;
    return out;
  }
  const double lo = bounds.low, range = static_cast<double>(bounds.high) - lo;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const float v = depth[i];
    if (v < bounds.low) {
      out[i] = 0.0f;
    } else if (v > bounds.high) {
      out[i] = 1.0f;
    } else {
      out[i] = static_cast<float>(std::clamp((v - lo) / range, 0.0, 1.0));
    }
  }
  return out;
}

TensorF enhance_depth(const TensorF& depth, double low_pct, double high_pct) {
  return ace(depth, percentile_bounds(depth, low_pct, high_pct));
}

}  // namespace ssnet
