#pragma once

#include <cmath>

#include "ssnet/random.hpp"
#include "ssnet/tensor.hpp"

namespace ssnet {

/// Role of a learnable tensor; decides how it is initialized.
enum class ParamKind {
  ConvWeight,    // [out, in, kh, kw]
  LinearWeight,  // [out, in]
  Projection,    // [in, out], applied as x * W
  Bias,
  BnGamma,
  BnBeta,
  BnMean,
  BnVar,
  StateLog,     // A_log [D,N]: A[d,n] = -(n+1)
  Feedthrough,  // ones
  DeltaBias,    // softplus^-1 of U[1e-3, 1e-1]
};

inline constexpr double kDeltaMin = 1e-3;
inline constexpr double kDeltaMax = 1e-1;

/// Glorot-uniform bound sqrt(6 / (fan_in + fan_out)) for weight-like kinds.
template <typename T>
double init_bound(const Tensor<T>& t, ParamKind kind) {
  double fan_in = 0, fan_out = 0;
  if (kind == ParamKind::ConvWeight) {
    const double rf = static_cast<double>(t.dim(2) * t.dim(3));
    fan_in = static_cast<double>(t.dim(1)) * rf;
    fan_out = static_cast<double>(t.dim(0)) * rf;
  } else {
    fan_in = static_cast<double>(t.dim(0));
    fan_out = static_cast<double>(t.dim(1));
  }
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
void init_tensor(Tensor<T>& t, ParamKind kind, Rng& rng) {
  switch (kind) {
    case ParamKind::ConvWeight:
    case ParamKind::LinearWeight:
    case ParamKind::Projection: {
      const double bound = init_bound(t, kind);
      for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case ParamKind::Bias:
    case ParamKind::BnBeta:
    case ParamKind::BnMean:
      for (auto& v : t.vec()) v = T(0);
      break;
    case ParamKind::BnGamma:
    case ParamKind::BnVar:
    case ParamKind::Feedthrough:
      for (auto& v : t.vec()) v = T(1);
      break;
    case ParamKind::StateLog: {
      const std::size_t n_state = t.dim(1);
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>(std::log(static_cast<double>(i % n_state + 1)));
      }
      break;
    }
    case ParamKind::DeltaBias:
      for (auto& v : t.vec()) {
        const double dt = rng.uniform(kDeltaMin, kDeltaMax);
        v = static_cast<T>(dt + std::log(-std::expm1(-dt)));
      }
      break;
  }
}

}  // namespace ssnet
