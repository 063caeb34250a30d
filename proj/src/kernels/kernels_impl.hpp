#pragma once
// Internal: per-variant kernel tables, defined in kernels_<isa>.cpp.

#include "memcom/kernels.hpp"

namespace memcom::kernels::detail {

extern const KernelSet<double> scalar_f64;
extern const KernelSet<float> scalar_f32;

#if defined(MEMCOM_HAVE_AVX2)
extern const KernelSet<double> avx2_f64;
extern const KernelSet<float> avx2_f32;
#endif

}  // namespace memcom::kernels::detail
