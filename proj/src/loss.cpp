#include "ssnet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ssnet {

std::vector<double> ssim_window_1d() {
  std::vector<double> g(kSsimWindow);
  const double center = static_cast<double>(kSsimWindow / 2);
  double sum = 0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - center;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

namespace {

// Separable Gaussian filter with zero padding, output the same size. The
// window is symmetric, so this is also its own adjoint.
template <typename T>
std::vector<T> gaussian_filter(const std::vector<T>& x, std::size_t h, std::size_t w, const std::vector<double>& g) {
  const long r = static_cast<long>(g.size() / 2);
  std::vector<T> tmp(h * w, T(0)), out(h * w, T(0));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      T acc = 0;
      for (long k = -r; k <= r; ++k) {
        const long sx = static_cast<long>(xx) + k;
        if (sx < 0 || sx >= static_cast<long>(w)) continue;
        acc += static_cast<T>(g[k + r]) * x[y * w + sx];
      }
      tmp[y * w + xx] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      T acc = 0;
      for (long k = -r; k <= r; ++k) {
        const long sy = static_cast<long>(y) + k;
        if (sy < 0 || sy >= static_cast<long>(h)) continue;
        acc += static_cast<T>(g[k + r]) * tmp[sy * w + xx];
      }
      out[y * w + xx] = acc;
    }
  return out;
}

}  // namespace

template <typename T>
LossResult<T> hybrid_loss(const Tensor<T>& P, const Tensor<T>& G) {
  if (P.shape() != G.shape()) {
    throw ShapeError("hybrid_loss: prediction " + shape_str(P.shape()) + " and target " + shape_str(G.shape()) +
                     " differ");
  }
  if (P.rank() != 3 || P.dim(0) != 1) throw ShapeError("hybrid_loss: expected [1,H,W], got " + shape_str(P.shape()));
  const std::size_t h = P.dim(1), w = P.dim(2), n = h * w;
  const T inv_n = T(1) / static_cast<T>(n);

  LossResult<T> r;
  r.grad = Tensor<T>(P.shape());
  auto& grad = r.grad.vec();

  // BCE
  const T lo = static_cast<T>(kBceClamp), hi = T(1) - static_cast<T>(kBceClamp);
  T bce = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T p = std::clamp(P[i], lo, hi), g = G[i];
    bce -= g * std::log(p) + (T(1) - g) * std::log(T(1) - p);
    if (P[i] > lo && P[i] < hi) grad[i] += -(g / p - (T(1) - g) / (T(1) - p)) * inv_n;
  }
  r.bce = bce * inv_n;

  // SSIM
  const auto win = ssim_window_1d();
  std::vector<T> x(P.data().begin(), P.data().end()), y(G.data().begin(), G.data().end());
  std::vector<T> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = gaussian_filter(x, h, w, win), my = gaussian_filter(y, h, w, win);
  const auto exx = gaussian_filter(xx, h, w, win), eyy = gaussian_filter(yy, h, w, win);
  const auto exy = gaussian_filter(xy, h, w, win);
  const T c1 = static_cast<T>(kSsimC1), c2 = static_cast<T>(kSsimC2);
  std::vector<T> d_mx(n), d_exx(n), d_exy(n);
  T ssim_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T a1 = T(2) * mx[i] * my[i] + c1;
    const T a2 = T(2) * (exy[i] - mx[i] * my[i]) + c2;
    const T b1 = mx[i] * mx[i] + my[i] * my[i] + c1;
    const T b2 = (exx[i] - mx[i] * mx[i]) + (eyy[i] - my[i] * my[i]) + c2;
    const T s = a1 * a2 / (b1 * b2);
    ssim_sum += s;
    const T ds = -inv_n;  // d(1 - mean S)/dS
    d_mx[i] = ds * s * (T(2) * my[i] / a1 - T(2) * my[i] / a2 - T(2) * mx[i] / b1 + T(2) * mx[i] / b2);
    d_exx[i] = ds * (-s / b2);
    d_exy[i] = ds * (T(2) * s / a2);
  }
  r.ssim = T(1) - ssim_sum * inv_n;
  const auto g_mx = gaussian_filter(d_mx, h, w, win);
  const auto g_exx = gaussian_filter(d_exx, h, w, win);
  const auto g_exy = gaussian_filter(d_exy, h, w, win);
  for (std::size_t i = 0; i < n; ++i) grad[i] += g_mx[i] + T(2) * x[i] * g_exx[i] + y[i] * g_exy[i];

  // IoU
  T inter = 0, sum_p = 0, sum_g = 0;
  for (std::size_t i = 0; i < n; ++i) {
    inter += P[i] * G[i];
    sum_p += P[i];
    sum_g += G[i];
  }
  const T uni = sum_p + sum_g - inter;
  r.iou = T(1) - (inter + T(1)) / (uni + T(1));
  const T denom = (uni + T(1)) * (uni + T(1));
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] += -(G[i] * (uni + T(1)) - (inter + T(1)) * (T(1) - G[i])) / denom;
  }

  r.loss = r.bce + r.ssim + r.iou;
  return r;
}

template LossResult<float> hybrid_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> hybrid_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace ssnet
