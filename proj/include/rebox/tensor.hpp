#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "rebox/errors.hpp"

namespace rebox {

/// Dense n-dimensional array (up to 4 axes), row-major with the last axis
/// fastest. Image and activation layout is (batch, height, width, channels).
/// Training runs with T = float; gradient checks instantiate T = double.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    for (int e : shape_)
      if (e <= 0) throw ShapeError("tensor extents must be positive");
    data_.assign(numel(), T(0));
  }

  TensorT(std::initializer_list<int> shape) : TensorT(std::vector<int>(shape)) {}

  static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

  int rank() const { return int(shape_.size()); }
  int extent(int axis) const { return shape_[size_t(axis)]; }
  const std::vector<int>& shape() const { return shape_; }

  size_t numel() const {
    size_t n = 1;
    for (int e : shape_) n *= size_t(e);
    return n;
  }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  // (n, y, x, c) accessor for rank-4 tensors.
  T& at4(int n, int y, int x, int c) {
    return data_[idx4(n, y, x, c)];
  }
  const T& at4(int n, int y, int x, int c) const {
    return data_[idx4(n, y, x, c)];
  }
  size_t idx4(int n, int y, int x, int c) const {
    assert(rank() == 4);
    return ((size_t(n) * shape_[1] + y) * shape_[2] + x) * shape_[3] + c;
  }

  // (y, x, c) accessor for rank-3 tensors (single image or patch).
  T& at3(int y, int x, int c) { return data_[idx3(y, x, c)]; }
  const T& at3(int y, int x, int c) const { return data_[idx3(y, x, c)]; }
  size_t idx3(int y, int x, int c) const {
    assert(rank() == 3);
    return (size_t(y) * shape_[1] + x) * shape_[2] + c;
  }

  T& at2(int r, int c) { return data_[size_t(r) * shape_[1] + c]; }
  const T& at2(int r, int c) const { return data_[size_t(r) * shape_[1] + c]; }

  /// Reinterprets the shape; element count must match, data is untouched.
  TensorT reshaped(std::vector<int> shape) const {
    TensorT out;
    out.shape_ = std::move(shape);
    size_t n = 1;
    for (int e : out.shape_) n *= size_t(e);
    if (n != numel()) throw ShapeError("reshape changes element count");
    out.data_ = data_;
    return out;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  TensorT& operator+=(const TensorT& o) {
    if (!same_shape(o)) throw ShapeError("elementwise add on mismatched shapes");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& in) {
  TensorT<To> out(in.shape());
  for (size_t i = 0; i < in.numel(); ++i) out[i] = To(in[i]);
  return out;
}

}  // namespace rebox
