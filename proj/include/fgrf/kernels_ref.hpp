// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

// Scalar reference kernels. These are the semantic ground truth: the SIMD
// variants are equivalence-tested against them, and the double-precision
// instantiations back every finite-difference gradient oracle.
namespace fgrf::kern::ref {

// C[M,N] (+)= A[M,K] * B[K,N]
template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int n, int k, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::fill(crow, crow + n, T(0));
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<std::size_t>(i) * k + p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] (+)= A[M,K] * B[N,K]^T  (rows of A dotted with rows of B)
template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int n, int k, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

// C[M,N] (+)= A[K,M]^T * B[K,N]
template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int n, int k, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::fill(crow, crow + n, T(0));
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<std::size_t>(p) * m + i];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void axpy(int n, T alpha, const T* x, T* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void scal(int n, T alpha, T* x) {
  for (int i = 0; i < n; ++i) x[i] *= alpha;
}

template <class T>
void vadd(int n, const T* x, const T* y, T* out) {
  for (int i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

template <class T>
void vsub(int n, const T* x, const T* y, T* out) {
  for (int i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

template <class T>
void vmul(int n, const T* x, const T* y, T* out) {
  for (int i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

// out = (1-t)*a + t*b
template <class T>
void lerp(int n, const T* a, const T* b, T t, T* out) {
  const T u = T(1) - t;
  for (int i = 0; i < n; ++i) out[i] = u * a[i] + t * b[i];
}

template <class T>
T dot(int n, const T* x, const T* y) {
  T acc = T(0);
  for (int i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
T sum(int n, const T* x) {
  T acc = T(0);
  for (int i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <class T>
T max(int n, const T* x) {
  T m = x[0];
  for (int i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

template <class T>
T sqdiff_sum(int n, const T* x, const T* y) {
  T acc = T(0);
  for (int i = 0; i < n; ++i) {
    const T d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

template <class T>
void vexp(int n, const T* x, T* y) {
  for (int i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

template <class T>
void vtanh(int n, const T* x, T* y) {
  for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <class T>
void vsigmoid(int n, const T* x, T* y) {
  for (int i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <class T>
void relu_fwd(int n, const T* x, T* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// dx = dy where x > 0 else 0
template <class T>
void relu_bwd(int n, const T* x, const T* dy, T* dx) {
  for (int i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
}

}  // namespace fgrf::kern::ref
