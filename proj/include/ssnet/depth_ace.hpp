#pragma once

#include "ssnet/tensor.hpp"

namespace ssnet {

/// Percentile bounds for the depth contrast stretch.
struct AceBounds {
  float low = 0.0f;
  float high = 1.0f;
  double low_pct = 1.0;
  double high_pct = 1.0;
};

inline constexpr double kDefaultAcePercent = 1.0;

/// Nearest-rank percentiles over the sorted pixel values of a [1,H,W] map:
///   low  = sorted[round(low_pct/100 * (n-1))]
///   high = sorted[round((1 - high_pct/100) * (n-1))]
/// Indices are clamped to [0, n-1] and high is never below low.
AceBounds percentile_bounds(const TensorF& depth, double low_pct = kDefaultAcePercent,
                            double high_pct = kDefaultAcePercent);

/// Linear stretch of [low, high] onto [0, 1] with saturation outside.
/// A degenerate range (high == low) yields 0.5 everywhere.
TensorF ace(const TensorF& depth, const AceBounds& bounds);

/// percentile_bounds followed by ace.
TensorF enhance_depth(const TensorF& depth, double low_pct = kDefaultAcePercent,
                      double high_pct = kDefaultAcePercent);

}  // namespace ssnet
