#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "ssnet/tensor.hpp"

namespace ssnet {

/// Seedable generator. Uses mt19937_64 with explicit bit-to-real mapping so a
/// seed produces the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t next() { return engine_(); }

  /// Integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

  template <typename T>
  Tensor<T> uniform_tensor(Shape shape, double lo, double hi) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.vec()) v = static_cast<T>(uniform(lo, hi));
    return t;
  }

  template <typename T>
  Tensor<T> normal_tensor(Shape shape, double stddev = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.vec()) v = static_cast<T>(stddev * normal());
    return t;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ssnet
