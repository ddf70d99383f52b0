#pragma once

#include <vector>

#include "ssnet/tensor.hpp"

// Numeric substrate for the network. Images and feature maps are [C, H, W],
// sequences are [L, D]. All functions are pure; explicit instantiations exist
// for float (inference) and double (gradient checks).

namespace ssnet {

template <typename T>
struct Conv2DParams {
  Tensor<T> weight;  // [outC, inC, kH, kW]
  Tensor<T> bias;    // [outC]
  int stride = 1;
  int padding = 0;
};

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T epsilon = T(1e-5);
};

/// Cross-correlation with zero padding.
/// Output extents: floor((H + 2*pad - kH) / stride) + 1 (same for W).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2DParams<T>& p);

/// Inference-mode batch normalization with running statistics.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const BatchNormParams<T>& p);

/// Bilinear resampling, align_corners = false, source coordinates clamped to
/// the image. Same-size requests return an exact copy.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

/// [C, H, W] -> [H*W, C], raster order (k = h*W + w).
template <typename T>
Tensor<T> im2seq(const Tensor<T>& x);

/// [H*W, D] -> [D, H, W]; inverse of im2seq.
template <typename T>
Tensor<T> seq2im(const Tensor<T>& s, std::size_t h, std::size_t w);

/// Reverses the sequence (first) axis.
template <typename T>
Tensor<T> flip_seq(const Tensor<T>& s);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> softplus(const Tensor<T>& x);
template <typename T>
Tensor<T> exp(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s);

/// [C1,H,W] ++ [C2,H,W] -> [C1+C2,H,W]
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
/// [L,D1] ++ [L,D2] -> [L,D1+D2]
template <typename T>
Tensor<T> concat_features(const Tensor<T>& a, const Tensor<T>& b);

/// Splits [C,H,W] into C tensors of shape [1,H,W].
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x);

/// Repeats a [1,H,W] map `times` times along the channel axis.
template <typename T>
Tensor<T> repeat_channels(const Tensor<T>& x, std::size_t times);

/// Per-channel global pooling: [C,H,W] -> [C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x);

/// Pooling across channels: [C,H,W] -> [1,H,W].
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x);
template <typename T>
Tensor<T> channel_max(const Tensor<T>& x);

/// x[c,h,w] * s[c]
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s);
/// x[c,h,w] * m[0,h,w]
template <typename T>
Tensor<T> scale_positions(const Tensor<T>& x, const Tensor<T>& m);

/// [M,K] x [K,N] -> [M,N]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Adds a [N] bias to every row of [M,N].
template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias);

/// Rescales to [0,1] by (x - min) / (max - min); constant input maps to 0.5.
template <typename T>
Tensor<T> minmax_normalize(const Tensor<T>& x);

template <typename T>
bool all_finite(const Tensor<T>& x);

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace ssnet
