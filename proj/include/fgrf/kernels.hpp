// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <type_traits>

#include "fgrf/kernels_ref.hpp"

namespace fgrf::kern {

enum class Backend { scalar, avx2 };

/// Function table for the float32 hot path. One table per backend; the active
/// one is picked at startup from cpuid (override with FGRF_KERNELS=scalar|avx2
/// or set_backend()).
struct KernelsF32 {
  void (*gemm_nn)(const float*, const float*, float*, int, int, int, bool);
  void (*gemm_nt)(const float*, const float*, float*, int, int, int, bool);
  void (*gemm_tn)(const float*, const float*, float*, int, int, int, bool);
  void (*axpy)(int, float, const float*, float*);
  void (*scal)(int, float, float*);
  void (*vadd)(int, const float*, const float*, float*);
  void (*vsub)(int, const float*, const float*, float*);
  void (*vmul)(int, const float*, const float*, float*);
  void (*lerp)(int, const float*, const float*, float, float*);
  float (*dot)(int, const float*, const float*);
  float (*sum)(int, const float*);
  float (*max)(int, const float*);
  float (*sqdiff_sum)(int, const float*, const float*);
  void (*vexp)(int, const float*, float*);
  void (*vtanh)(int, const float*, float*);
  void (*vsigmoid)(int, const float*, float*);
  void (*relu_fwd)(int, const float*, float*);
  void (*relu_bwd)(int, const float*, const float*, float*);
  const char* name;
};

bool avx2_supported();
Backend active_backend();
void set_backend(Backend b);  // throws std::runtime_error if unsupported
const KernelsF32& f32();
const KernelsF32& f32_table(Backend b);
std::string backend_name(Backend b);

// Type-dispatching wrappers. float routes through the runtime-selected table,
// every other scalar type through the reference kernels.
#define FGRF_KERN_WRAP(fn)                                                          \
  template <class T, class... Args>                                                \
  inline auto fn(Args... args) {                                                   \
    if constexpr (std::is_same_v<T, float>)                                        \
      return f32().fn(args...);                                                    \
    else                                                                           \
      return ref::fn<T>(args...);                                                  \
  }

FGRF_KERN_WRAP(gemm_nn)
FGRF_KERN_WRAP(gemm_nt)
FGRF_KERN_WRAP(gemm_tn)
FGRF_KERN_WRAP(axpy)
FGRF_KERN_WRAP(scal)
FGRF_KERN_WRAP(vadd)
FGRF_KERN_WRAP(vsub)
FGRF_KERN_WRAP(vmul)
FGRF_KERN_WRAP(lerp)
FGRF_KERN_WRAP(dot)
FGRF_KERN_WRAP(sum)
FGRF_KERN_WRAP(max)
FGRF_KERN_WRAP(sqdiff_sum)
FGRF_KERN_WRAP(vexp)
FGRF_KERN_WRAP(vtanh)
FGRF_KERN_WRAP(vsigmoid)
FGRF_KERN_WRAP(relu_fwd)
FGRF_KERN_WRAP(relu_bwd)

#undef FGRF_KERN_WRAP

}  // namespace fgrf::kern
