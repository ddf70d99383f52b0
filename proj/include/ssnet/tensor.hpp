#pragma once

#include <cassert>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ssnet {

using Shape = std::vector<std::size_t>;

/// Raised when operand extents disagree with an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_str(const Shape& shape);

inline std::size_t shape_numel(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array. A default-constructed tensor is empty (rank 0, no
/// data); every other tensor has extents >= 1 and numel == product(shape).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    validate_extents();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_extents();
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[offset(i, j)]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[offset(i, j)]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) { return data_[offset(i, j, k)]; }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const { return data_[offset(i, j, k)]; }
  T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) { return data_[offset(i, j, k, l)]; }
  const T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[offset(i, j, k, l)];
  }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    if (empty()) return {};
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_extents() const {
    for (std::size_t e : shape_) {
      if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_str(shape_));
    }
  }

  std::size_t offset(std::size_t i, std::size_t j) const {
    assert(rank() == 2 && i < shape_[0] && j < shape_[1]);
    return i * shape_[1] + j;
  }
  std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const {
    assert(rank() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
    return (i * shape_[1] + j) * shape_[2] + k;
  }
  std::size_t offset(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    assert(rank() == 4 && i < shape_[0] && j < shape_[1] && k < shape_[2] && l < shape_[3]);
    return ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
  }

  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace ssnet
