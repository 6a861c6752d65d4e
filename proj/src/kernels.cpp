// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#include "fgrf/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace fgrf::kern {

namespace {

KernelsF32 make_scalar_table() {
  KernelsF32 t{};
  t.gemm_nn = &ref::gemm_nn<float>;
  t.gemm_nt = &ref::gemm_nt<float>;
  t.gemm_tn = &ref::gemm_tn<float>;
  t.axpy = &ref::axpy<float>;
  t.scal = &ref::scal<float>;
  t.vadd = &ref::vadd<float>;
  t.vsub = &ref::vsub<float>;
  t.vmul = &ref::vmul<float>;
  t.lerp = &ref::lerp<float>;
  t.dot = &ref::dot<float>;
  t.sum = &ref::sum<float>;
  t.max = &ref::max<float>;
  t.sqdiff_sum = &ref::sqdiff_sum<float>;
  t.vexp = &ref::vexp<float>;
  t.vtanh = &ref::vtanh<float>;
  t.vsigmoid = &ref::vsigmoid<float>;
  t.relu_fwd = &ref::relu_fwd<float>;
  t.relu_bwd = &ref::relu_bwd<float>;
  t.name = "scalar";
  return t;
}

const KernelsF32& scalar_table() {
  static const KernelsF32 t = make_scalar_table();
  return t;
}

Backend pick_default() {
  if (const char* env = std::getenv("FGRF_KERNELS")) {
    std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2") {
      if (!avx2_supported()) throw std::runtime_error("FGRF_KERNELS=avx2 but cpu lacks avx2");
      return Backend::avx2;
    }
    throw std::runtime_error("FGRF_KERNELS must be 'scalar' or 'avx2', got '" + v + "'");
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& active_slot() {
  static Backend b = pick_default();
  return b;
}

}  // namespace

#if defined(FGRF_HAVE_AVX2_TU)
const KernelsF32& avx2_table();  // defined in kernels_avx2.cpp
bool avx2_supported() { return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"); }
#else
bool avx2_supported() { return false; }
#endif

Backend active_backend() { return active_slot(); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported())
    throw std::runtime_error("avx2 kernels unavailable on this cpu/build");
  active_slot() = b;
}

const KernelsF32& f32_table(Backend b) {
#if defined(FGRF_HAVE_AVX2_TU)
  if (b == Backend::avx2) return avx2_table();
#endif
  if (b == Backend::avx2) throw std::runtime_error("avx2 kernels not compiled in");
  return scalar_table();
}

const KernelsF32& f32() { return f32_table(active_slot()); }

std::string backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

}  // namespace fgrf::kern
