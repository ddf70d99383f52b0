#pragma once

#include "ssnet/tensor.hpp"

namespace ssnet {

struct OtsuResult {
  /// Histogram level in [-1, 255]; pixels whose 8-bit level exceeds it are front.
  /// -1 marks a single-level image, which is treated as all front.
  int level = -1;
  float threshold = 0.0f;  // level / 255
  TensorF front;
  TensorF back;
};

/// The three saliency priors and the maps they are built from. All maps are [1,H,W].
struct PriorSet {
  TensorF S1;  // depth-front prior
  TensorF S2;  // local-contrast prior
  TensorF S3;  // center prior
  TensorF O_front;
  TensorF O_back;
  TensorF C_x;
  TensorF C_y;
  TensorF M;
  int otsu_level = -1;
};

/// 8-bit histogram bin of a value in [0,1].
int intensity_level(float v);

/// Otsu's method over a 256-bin histogram. The lowest level attaining the
/// maximum between-class variance wins.
OtsuResult otsu_threshold(const TensorF& img);

/// Dilation minus erosion with a 3x3 square element, replicated borders.
TensorF morphological_gradient(const TensorF& img);

/// Sum of the morphological gradients of the R, G and B planes of a [3,H,W] image.
TensorF rgb_contrast(const TensorF& rgb);

inline constexpr double kCenterSigmaScale = 0.3;

/// Gaussian center mask exp(-d^2 / (2 sigma^2)), sigma = 0.3 * min(H, W),
/// d measured from each pixel center to the image center.
TensorF center_mask(std::size_t h, std::size_t w);

/// Priors from an RGB image [3,H,W] and an enhanced depth map [1,H,W].
PriorSet compute_priors(const TensorF& rgb, const TensorF& depth);

}  // namespace ssnet
