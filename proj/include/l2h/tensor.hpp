#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "l2h/errors.hpp"

namespace l2h {

// Dense row-major tensor. Shapes used in this project are {C,H,W} for
// feature maps, {rows,cols} for matrices, {N} for vectors and
// {OC,IC,K,K} for convolution weights.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}
  TensorT(std::initializer_list<int> s) : TensorT(std::vector<int>(s)) {}

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) fail(ErrorCode::bad_dims, "negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  int dim(std::size_t i) const { return shape[i]; }
  int rank() const { return static_cast<int>(shape.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // {C,H,W} accessors.
  T& at3(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  const T& at3(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  // {rows,cols} accessors.
  T& at2(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  const T& at2(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename T>
void require_shape(const TensorT<T>& t, const std::vector<int>& shape, const char* what) {
  if (t.shape != shape) fail(ErrorCode::shape_mismatch, what);
}

}  // namespace l2h
