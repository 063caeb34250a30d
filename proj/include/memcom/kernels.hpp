#pragma once
// Inner-loop kernels with a scalar reference path and an AVX2/FMA path.
//
// The active variant is chosen once at startup from the host CPU (cpuid),
// optionally overridden by MEMCOM_ISA=scalar|avx2 or force_isa(). Elementwise
// kernels (add, mul, scale_shift, gather_rows) are bit-identical across
// variants; reductions (dot, axpy, gemm) may differ in the last bits because
// the AVX2 path fuses multiply-add and reorders the summation.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace memcom::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

template <typename T>
struct KernelSet {
    Isa isa;
    // sum_i a[i] * b[i]
    T (*dot)(const T* a, const T* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
    // y += x
    void (*add)(const T* x, T* y, std::size_t n);
    // out = a * b
    void (*mul)(const T* a, const T* b, T* out, std::size_t n);
    // out = a * s + shift (multiply, then add; never fused)
    void (*scale_shift)(const T* a, T s, T shift, T* out, std::size_t n);
    // c[p x r] += a[p x q] * b[q x r], all row-major, dense (no zero skipping)
    void (*gemm)(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r);
    // out[k, :] = table[rows[k], :]
    void (*gather_rows)(const T* table, std::size_t width, const std::int64_t* rows, std::size_t n,
                        T* out);
};

template <typename T>
const KernelSet<T>& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks it.
template <typename T>
const KernelSet<T>* kernels_for(Isa isa);

bool isa_available(Isa isa);

Isa active_isa();

// Throws ConfigError when the requested variant is unavailable.
void force_isa(Isa isa);

template <typename T>
const KernelSet<T>& active();

}  // namespace memcom::kernels
