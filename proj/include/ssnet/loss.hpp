#pragma once

#include <vector>

#include "ssnet/tensor.hpp"

namespace ssnet {

inline constexpr double kBceClamp = 1e-7;
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

template <typename T>
struct LossResult {
  T loss = 0;  // bce + ssim + iou
  T bce = 0;
  T ssim = 0;  // 1 - mean local SSIM
  T iou = 0;   // 1 - (sum PG + 1) / (sum P + sum G - sum PG + 1)
  Tensor<T> grad;  // d loss / d P
};

/// Hybrid BCE + SSIM + IoU loss of a prediction P against a target G, both
/// [1,H,W]. Local SSIM uses an 11x11 Gaussian window (sigma 1.5) with zero
/// padding, averaged over every pixel. P is clamped to [1e-7, 1-1e-7] for the
/// BCE term only; clamped pixels receive no BCE gradient.
template <typename T>
LossResult<T> hybrid_loss(const Tensor<T>& P, const Tensor<T>& G);

/// Normalized 1-D Gaussian taps of the SSIM window.
std::vector<double> ssim_window_1d();

}  // namespace ssnet
