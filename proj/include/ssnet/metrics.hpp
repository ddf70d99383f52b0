#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ssnet/tensor.hpp"

// Saliency evaluation. Predictions P are [1,H,W] in [0,1]; ground truth G is
// binarized at G > 0.5. Thresholded measures sweep t = k/255, k = 0..255,
// with P > t counted as foreground.

namespace ssnet {

inline constexpr std::size_t kThresholds = 256;
inline constexpr double kBetaSquared = 0.3;
inline constexpr double kStructureAlpha = 0.5;

struct PrPoint {
  double precision = 0;
  double recall = 0;
};

struct MetricReport {
  double mae = 0;
  double f_beta_max = 0;
  double s_measure = 0;
  double e_measure_max = 0;
  double e_measure_mean = 0;
  std::vector<PrPoint> pr;  // one point per threshold
};

double mae(const TensorF& P, const TensorF& G);

struct FBetaResult {
  double f_max = 0;
  std::vector<PrPoint> pr;
};

/// Precision is 1 when nothing is predicted and G is empty, 0 when nothing is
/// predicted but G is not. Recall is 1 when G is empty.
FBetaResult f_beta(const TensorF& P, const TensorF& G);

/// Structure measure alpha * S_object + (1 - alpha) * S_region. All-zero G
/// gives 1 - mean(P); all-one G gives mean(P).
double s_measure(const TensorF& P, const TensorF& G);

struct EMeasureResult {
  double e_max = 0;
  double e_mean = 0;
  std::vector<double> curve;  // per threshold
};

/// Enhanced-alignment measure per threshold, averaged over pixels.
EMeasureResult e_measure(const TensorF& P, const TensorF& G);

MetricReport evaluate(const TensorF& P, const TensorF& G);

/// Arithmetic mean of per-image reports; PR points averaged per threshold.
MetricReport average_reports(const std::vector<MetricReport>& reports);

/// Evaluates every .pgm in `gt_dir` against the same-named file in `pred_dir`.
MetricReport evaluate_dataset(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

/// {"mae": .., "f_beta_max": .., "s_measure": .., "e_measure_max": ..,
///  "e_measure_mean": .., "pr": [[p, r], ...]} with six decimals.
std::string report_to_json(const MetricReport& r);

}  // namespace ssnet
