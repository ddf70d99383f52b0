#include "ssnet/priors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ssnet/ops.hpp"

namespace ssnet {

namespace {

void check_map(const TensorF& img, const char* op) {
  if (img.rank() != 3 || img.dim(0) != 1) {
    throw ShapeError(std::string(op) + ": expected a [1,H,W] map, got " + shape_str(img.shape()));
  }
}

}  // namespace

int intensity_level(float v) {
  const float scaled = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
  return static_cast<int>(scaled);
}

OtsuResult otsu_threshold(const TensorF& img) {
  check_map(img, "otsu_threshold");
  std::array<double, 256> hist{};
  for (float v : img.data()) hist[intensity_level(v)] += 1.0;

  // Between-class variance up to the constant factor 1/n^2:
  //   (m0*n1 - m1*n0)^2 / (n0*n1), with n_i pixel counts and m_i level sums.
  double total_n = 0.0, total_m = 0.0;
  for (int i = 0; i < 256; ++i) {
    total_n += hist[i];
    total_m += hist[i] * i;
  }
  int best = -1;
  double best_score = 0.0;
  double n0 = 0.0, m0 = 0.0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist[t];
    m0 += hist[t] * t;
    const double n1 = total_n - n0, m1 = total_m - m0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double diff = m0 * n1 - m1 * n0;
    const double score = diff * diff / (n0 * n1);
    if (score > best_score) {
      best_score = score;
      best = t;
    }
  }

  OtsuResult r;
  r.level = best;
  r.threshold = static_cast<float>(best) / 255.0f;
  r.front = TensorF(img.shape());
  r.back = TensorF(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const bool front = intensity_level(img[i]) > best;
    r.front[i] = front ? 1.0f : 0.0f;
    r.back[i] = front ? 0.0f : 1.0f;
  }
  return r;
}

TensorF morphological_gradient(const TensorF& img) {
  check_map(img, "morphological_gradient");
  const std::size_t h = img.dim(1), w = img.dim(2);
  // Separable 3x3 max/min: horizontal pass then vertical pass.
  TensorF row_max(img.shape()), row_min(img.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t xl = x == 0 ? 0 : x - 1, xr = std::min(x + 1, w - 1);
      const float a = img.at(0, y, xl), b = img.at(0, y, x), c = img.at(0, y, xr);
      row_max.at(0, y, x) = std::max({a, b, c});
      row_min.at(0, y, x) = std::min({a, b, c});
    }
  }
  TensorF out(img.shape());
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t yu = y == 0 ? 0 : y - 1, yd = std::min(y + 1, h - 1);
    for (std::size_t x = 0; x < w; ++x) {
      const float dil = std::max({row_max.at(0, yu, x), row_max.at(0, y, x), row_max.at(0, yd, x)});
      const float ero = std::min({row_min.at(0, yu, x), row_min.at(0, y, x), row_min.at(0, yd, x)});
      out.at(0, y, x) = dil - ero;
    }
  }
  return out;
}

TensorF rgb_contrast(const TensorF& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) {
    throw ShapeError("rgb_contrast: expected [3,H,W], got " + shape_str(rgb.shape()));
  }
  const auto planes = split_channels(rgb);
  TensorF sum = morphological_gradient(planes[0]);
  sum = add(sum, morphological_gradient(planes[1]));
  return add(sum, morphological_gradient(planes[2]));
}

TensorF center_mask(std::size_t h, std::size_t w) {
  if (h < 1 || w < 1) throw ShapeError("center_mask: extents must be >= 1");
  const double sigma = kCenterSigmaScale * static_cast<double>(std::min(h, w));
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  TensorF m({1, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      m.at(0, y, x) = static_cast<float>(std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma)));
    }
  }
  return m;
}

PriorSet compute_priors(const TensorF& rgb, const TensorF& depth) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) {
    throw ShapeError("compute_priors: RGB image must be [3,H,W], got " + shape_str(rgb.shape()));
  }
  check_map(depth, "compute_priors");
  if (rgb.dim(1) != depth.dim(1) || rgb.dim(2) != depth.dim(2)) {
    throw ShapeError("compute_priors: RGB " + shape_str(rgb.shape()) + " and depth " +
                     shape_str(depth.shape()) + " differ in spatial extent");
  }
  PriorSet p;
  OtsuResult otsu = otsu_threshold(depth);
  p.otsu_level = otsu.level;
  p.O_front = std::move(otsu.front);
  p.O_back = std::move(otsu.back);
  p.C_x = rgb_contrast(rgb);
  p.C_y = morphological_gradient(depth);
  p.M = center_mask(depth.dim(1), depth.dim(2));
  p.S1 = p.O_front;
  p.S2 = minmax_normalize(add(p.C_x, p.C_y));
  p.S3 = p.M;
  return p;
}

}  // namespace ssnet
