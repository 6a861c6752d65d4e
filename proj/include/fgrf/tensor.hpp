// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgrf {

/// Dense row-major tensor. Shapes are small (rank <= 4), storage is a flat
/// std::vector so kernels can operate on raw pointers.
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::size_t>(numel_of(shape)) != data.size())
      throw std::invalid_argument("tensor: shape/data size mismatch");
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  long numel() const { return static_cast<long>(data.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](long i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](long i) const { return data[static_cast<std::size_t>(i)]; }

  // Row-major accessors for the common ranks.
  T& at2(int i, int j) { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
  const T& at2(int i, int j) const { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
  T& at3(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  const T& at3(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  T& at4(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  const T& at4(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  Tensor reshaped(std::vector<int> s) const {
    if (numel_of(s) != numel()) throw std::invalid_argument("tensor: reshape numel mismatch");
    Tensor r;
    r.shape = std::move(s);
    r.data = data;
    return r;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> r;
    r.shape = shape;
    r.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) r.data[i] = static_cast<U>(data[i]);
    return r;
  }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
  }
};

inline void check_same_shape(const std::vector<int>& a, const std::vector<int>& b,
                             const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": shape mismatch";
    throw std::invalid_argument(os.str());
  }
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace fgrf
