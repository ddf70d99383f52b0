#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ssnet/ops.hpp"

namespace ssnet {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

template <typename T>
void require_rank(const Tensor<T>& x, std::size_t rank, const char* op, const char* what) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got shape " + shape_str(x.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& x, F f) {
  Tensor<T> out = x;
  for (auto& v : out.vec()) v = f(v);
  return out;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2DParams<T>& p) {
  require_rank(x, 3, "conv2d", "input");
  require_rank(p.weight, 4, "conv2d", "weight");
  const std::size_t in_c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t out_c = p.weight.dim(0), k_h = p.weight.dim(2), k_w = p.weight.dim(3);
  if (p.weight.dim(1) != in_c) {
    throw ShapeError("conv2d: input channel axis has " + std::to_string(in_c) +
                     " channels but weight expects " + std::to_string(p.weight.dim(1)));
  }
  if (p.bias.rank() != 1 || p.bias.dim(0) != out_c) {
    throw ShapeError("conv2d: bias shape " + shape_str(p.bias.shape()) + " does not match output channels " +
                     std::to_string(out_c));
  }
  if (k_h % 2 == 0 || k_w % 2 == 0) {
    throw ShapeError("conv2d: kernel extents must be odd, got " + shape_str(p.weight.shape()));
  }
  if (p.stride < 1 || p.padding < 0) {
    throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  }
  const long pad = p.padding, stride = p.stride;
  const long span_h = static_cast<long>(h) + 2 * pad - static_cast<long>(k_h);
  const long span_w = static_cast<long>(w) + 2 * pad - static_cast<long>(k_w);
  if (span_h < 0) throw ShapeError("conv2d: height axis smaller than kernel after padding");
  if (span_w < 0) throw ShapeError("conv2d: width axis smaller than kernel after padding");
  const std::size_t out_h = static_cast<std::size_t>(span_h / stride) + 1;
  const std::size_t out_w = static_cast<std::size_t>(span_w / stride) + 1;

  Tensor<T> out({out_c, out_h, out_w});
  const T* xd = x.data().data();
  const T* wd = p.weight.data().data();
  T* od = out.data().data();

#pragma omp parallel for schedule(static)
  for (long oc = 0; oc < static_cast<long>(out_c); ++oc) {
    T* plane = od + oc * out_h * out_w;
    std::fill(plane, plane + out_h * out_w, p.bias[oc]);
    for (std::size_t ic = 0; ic < in_c; ++ic) {
      const T* xin = xd + ic * h * w;
      for (std::size_t ky = 0; ky < k_h; ++ky) {
        for (std::size_t kx = 0; kx < k_w; ++kx) {
          const T wv = wd[((oc * in_c + ic) * k_h + ky) * k_w + kx];
          if (wv == T(0)) continue;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const long iy = static_cast<long>(oy) * stride - pad + static_cast<long>(ky);
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            const T* row = xin + iy * w;
            T* orow = plane + oy * out_w;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const long ix = static_cast<long>(ox) * stride - pad + static_cast<long>(kx);
              if (ix < 0 || ix >= static_cast<long>(w)) continue;
              orow[ox] += wv * row[ix];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const BatchNormParams<T>& p) {
  if (x.rank() < 1) throw ShapeError("batch_norm: input must have a channel axis");
  const std::size_t c = x.dim(0);
  for (const Tensor<T>* t : {&p.gamma, &p.beta, &p.running_mean, &p.running_var}) {
    if (t->rank() != 1 || t->dim(0) != c) {
      throw ShapeError("batch_norm: parameter shape " + shape_str(t->shape()) + " does not match " +
                       std::to_string(c) + " channels");
    }
  }
  if (!(p.epsilon > T(0))) throw std::invalid_argument("batch_norm: epsilon must be positive");
  for (T v : p.running_var.data()) {
    if (v < T(0)) throw std::invalid_argument("batch_norm: running_var must be non-negative");
  }
  Tensor<T> out = x;
  const std::size_t plane = x.size() / c;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T inv = T(1) / std::sqrt(p.running_var[ch] + p.epsilon);
    const T g = p.gamma[ch] * inv;
    const T b = p.beta[ch] - p.running_mean[ch] * g;
    T* d = out.data().data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) d[i] = d[i] * g + b;
  }
  return out;
}

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "bilinear_resize", "input");
  if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: target extents must be >= 1");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (out_h == h && out_w == w) return x;

  struct Tap {
    std::size_t i0, i1;
    T frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, static_cast<T>(src - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);

  Tensor<T> out({c, out_h, out_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[ox];
        const T top = x.at(ch, a.i0, b.i0) + (x.at(ch, a.i0, b.i1) - x.at(ch, a.i0, b.i0)) * b.frac;
        const T bot = x.at(ch, a.i1, b.i0) + (x.at(ch, a.i1, b.i1) - x.at(ch, a.i1, b.i0)) * b.frac;
        out.at(ch, oy, ox) = top + (bot - top) * a.frac;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> im2seq(const Tensor<T>& x) {
  require_rank(x, 3, "im2seq", "input");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> s({h * w, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t k = 0; k < h * w; ++k) s.at(k, ch) = x[ch * h * w + k];
  return s;
}

template <typename T>
Tensor<T> seq2im(const Tensor<T>& s, std::size_t h, std::size_t w) {
  require_rank(s, 2, "seq2im", "sequence");
  if (s.dim(0) != h * w) {
    throw ShapeError("seq2im: sequence length " + std::to_string(s.dim(0)) + " != H*W = " +
                     std::to_string(h) + "*" + std::to_string(w));
  }
  const std::size_t d = s.dim(1);
  Tensor<T> x({d, h, w});
  for (std::size_t ch = 0; ch < d; ++ch)
    for (std::size_t k = 0; k < h * w; ++k) x[ch * h * w + k] = s.at(k, ch);
  return x;
}

template <typename T>
Tensor<T> flip_seq(const Tensor<T>& s) {
  require_rank(s, 2, "flip_seq", "sequence");
  const std::size_t l = s.dim(0), d = s.dim(1);
  Tensor<T> out(s.shape());
  for (std::size_t k = 0; k < l; ++k)
    std::copy_n(s.data().data() + (l - 1 - k) * d, d, out.data().data() + k * d);
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return map(x, [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return map(x, [](T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return map(x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return map(x, [](T v) { return std::exp(v); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  return map(x, [s](T v) { return v * s; });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 3, "concat_channels", "first operand");
  require_rank(b, 3, "concat_channels", "second operand");
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw ShapeError("concat_channels: spatial extents differ " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<T> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor<T>({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(data));
}

template <typename T>
Tensor<T> concat_features(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "concat_features", "first operand");
  require_rank(b, 2, "concat_features", "second operand");
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("concat_features: sequence lengths differ " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::size_t l = a.dim(0), da = a.dim(1), db = b.dim(1);
  Tensor<T> out({l, da + db});
  for (std::size_t k = 0; k < l; ++k) {
    std::copy_n(a.data().data() + k * da, da, out.data().data() + k * (da + db));
    std::copy_n(b.data().data() + k * db, db, out.data().data() + k * (da + db) + da);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x) {
  require_rank(x, 3, "split_channels", "input");
  const std::size_t plane = x.dim(1) * x.dim(2);
  std::vector<Tensor<T>> out;
  out.reserve(x.dim(0));
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    std::vector<T> d(x.data().begin() + c * plane, x.data().begin() + (c + 1) * plane);
    out.emplace_back(Shape{1, x.dim(1), x.dim(2)}, std::move(d));
  }
  return out;
}

template <typename T>
Tensor<T> repeat_channels(const Tensor<T>& x, std::size_t times) {
  require_rank(x, 3, "repeat_channels", "input");
  if (x.dim(0) != 1) throw ShapeError("repeat_channels: expected a single-channel map");
  if (times < 1) throw ShapeError("repeat_channels: times must be >= 1");
  std::vector<T> d;
  d.reserve(x.size() * times);
  for (std::size_t i = 0; i < times; ++i) d.insert(d.end(), x.data().begin(), x.data().end());
  return Tensor<T>({times, x.dim(1), x.dim(2)}, std::move(d));
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank(x, 3, "global_avg_pool", "input");
  const std::size_t plane = x.dim(1) * x.dim(2);
  Tensor<T> out({x.dim(0)});
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    T acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += x[c * plane + i];
    out[c] = acc / static_cast<T>(plane);
  }
  return out;
}

template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
  require_rank(x, 3, "global_max_pool", "input");
  const std::size_t plane = x.dim(1) * x.dim(2);
  Tensor<T> out({x.dim(0)});
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    const auto first = x.data().begin() + c * plane;
    out[c] = *std::max_element(first, first + plane);
  }
  return out;
}

template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x) {
  require_rank(x, 3, "channel_mean", "input");
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  Tensor<T> out({1, x.dim(1), x.dim(2)});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < plane; ++i) out[i] += x[ch * plane + i];
  for (auto& v : out.vec()) v /= static_cast<T>(c);
  return out;
}

template <typename T>
Tensor<T> channel_max(const Tensor<T>& x) {
  require_rank(x, 3, "channel_max", "input");
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  Tensor<T> out({1, x.dim(1), x.dim(2)});
  std::copy_n(x.data().data(), plane, out.data().data());
  for (std::size_t ch = 1; ch < c; ++ch)
    for (std::size_t i = 0; i < plane; ++i) out[i] = std::max(out[i], x[ch * plane + i]);
  return out;
}

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s) {
  require_rank(x, 3, "scale_channels", "input");
  if (s.rank() != 1 || s.dim(0) != x.dim(0)) {
    throw ShapeError("scale_channels: scale shape " + shape_str(s.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  const std::size_t plane = x.dim(1) * x.dim(2);
  Tensor<T> out = x;
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] *= s[c];
  return out;
}

template <typename T>
Tensor<T> scale_positions(const Tensor<T>& x, const Tensor<T>& m) {
  require_rank(x, 3, "scale_positions", "input");
  if (m.rank() != 3 || m.dim(0) != 1 || m.dim(1) != x.dim(1) || m.dim(2) != x.dim(2)) {
    throw ShapeError("scale_positions: mask shape " + shape_str(m.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  const std::size_t plane = x.dim(1) * x.dim(2);
  Tensor<T> out = x;
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] *= m[i];
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul", "left operand");
  require_rank(b, 2, "matmul", "right operand");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = out.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank(x, 2, "add_row_bias", "input");
  if (bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw ShapeError("add_row_bias: bias shape " + shape_str(bias.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  Tensor<T> out = x;
  const std::size_t n = x.dim(1);
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias[j];
  return out;
}

template <typename T>
Tensor<T> minmax_normalize(const Tensor<T>& x) {
  if (x.empty()) return x;
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  const T mn = *lo, mx = *hi;
  if (!(mx > mn)) return Tensor<T>(x.shape(), T(0.5));
  const T inv = T(1) / (mx - mn);
  return map(x, [mn, inv](T v) { return std::clamp((v - mn) * inv, T(0), T(1)); });
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
  return std::all_of(x.data().begin(), x.data().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

#define SSNET_INSTANTIATE_OPS(T)                                                                     \
  template Tensor<T> conv2d(const Tensor<T>&, const Conv2DParams<T>&);                               \
  template Tensor<T> batch_norm(const Tensor<T>&, const BatchNormParams<T>&);                        \
  template Tensor<T> bilinear_resize(const Tensor<T>&, std::size_t, std::size_t);                    \
  template Tensor<T> im2seq(const Tensor<T>&);                                                       \
  template Tensor<T> seq2im(const Tensor<T>&, std::size_t, std::size_t);                             \
  template Tensor<T> flip_seq(const Tensor<T>&);                                                     \
  template Tensor<T> relu(const Tensor<T>&);                                                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                      \
  template Tensor<T> softplus(const Tensor<T>&);                                                     \
  template Tensor<T> exp(const Tensor<T>&);                                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                                     \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> concat_features(const Tensor<T>&, const Tensor<T>&);                            \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&);                                  \
  template Tensor<T> repeat_channels(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                              \
  template Tensor<T> global_max_pool(const Tensor<T>&);                                              \
  template Tensor<T> channel_mean(const Tensor<T>&);                                                 \
  template Tensor<T> channel_max(const Tensor<T>&);                                                  \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale_positions(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> add_row_bias(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> minmax_normalize(const Tensor<T>&);                                             \
  template bool all_finite(const Tensor<T>&);                                                        \
  template T max_abs_diff(const Tensor<T>&, const Tensor<T>&);

SSNET_INSTANTIATE_OPS(float)
SSNET_INSTANTIATE_OPS(double)

}  // namespace ssnet
