// AVX2 + FMA kernels. Compiled with -mavx2 -mfma; only reached after the
// runtime cpuid check in kernels.cpp.

#include <immintrin.h>

#include <cstring>

#include "kernels_impl.hpp"

namespace memcom::kernels::detail {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<double> {
    using reg = __m256d;
    static constexpr std::size_t lanes = 4;
    static reg load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
    static reg set1(double x) { return _mm256_set1_pd(x); }
    static reg zero() { return _mm256_setzero_pd(); }
    static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
    static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
    static double hsum(reg v) {
        __m128d lo = _mm256_castpd256_pd128(v);
        __m128d hi = _mm256_extractf128_pd(v, 1);
        lo = _mm_add_pd(lo, hi);
        __m128d sh = _mm_unpackhi_pd(lo, lo);
        return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
    }
};

template <>
struct Vec<float> {
    using reg = __m256;
    static constexpr std::size_t lanes = 8;
    static reg load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
    static reg set1(float x) { return _mm256_set1_ps(x); }
    static reg zero() { return _mm256_setzero_ps(); }
    static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
    static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
    static float hsum(reg v) {
        __m128 lo = _mm256_castps256_ps128(v);
        __m128 hi = _mm256_extractf128_ps(v, 1);
        lo = _mm_add_ps(lo, hi);
        __m128 sh = _mm_movehl_ps(lo, lo);
        lo = _mm_add_ps(lo, sh);
        sh = _mm_shuffle_ps(lo, lo, 0x1);
        return _mm_cvtss_f32(_mm_add_ss(lo, sh));
    }
};

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
    using V = Vec<T>;
    constexpr std::size_t L = V::lanes;
    auto acc0 = V::zero(), acc1 = V::zero(), acc2 = V::zero(), acc3 = V::zero();
    std::size_t i = 0;
    for (; i + 4 * L <= n; i += 4 * L) {
        acc0 = V::fmadd(V::load(a + i), V::load(b + i), acc0);
        acc1 = V::fmadd(V::load(a + i + L), V::load(b + i + L), acc1);
        acc2 = V::fmadd(V::load(a + i + 2 * L), V::load(b + i + 2 * L), acc2);
        acc3 = V::fmadd(V::load(a + i + 3 * L), V::load(b + i + 3 * L), acc3);
    }
    for (; i + L <= n; i += L) acc0 = V::fmadd(V::load(a + i), V::load(b + i), acc0);
    T acc = V::hsum(V::add(V::add(acc0, acc1), V::add(acc2, acc3)));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    using V = Vec<T>;
    constexpr std::size_t L = V::lanes;
    const auto va = V::set1(alpha);
    std::size_t i = 0;
    for (; i + 2 * L <= n; i += 2 * L) {
        V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
        V::store(y + i + L, V::fmadd(va, V::load(x + i + L), V::load(y + i + L)));
    }
    for (; i + L <= n; i += L) V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add(const T* x, T* y, std::size_t n) {
    using V = Vec<T>;
    constexpr std::size_t L = V::lanes;
    std::size_t i = 0;
    for (; i + L <= n; i += L) V::store(y + i, V::add(V::load(y + i), V::load(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
    using V = Vec<T>;
    constexpr std::size_t L = V::lanes;
    std::size_t i = 0;
    for (; i + L <= n; i += L) V::store(out + i, V::mul(V::load(a + i), V::load(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale_shift(const T* a, T s, T shift, T* out, std::size_t n) {
    using V = Vec<T>;
    constexpr std::size_t L = V::lanes;
    const auto vs = V::set1(s);
    const auto vb = V::set1(shift);
    std::size_t i = 0;
    for (; i + L <= n; i += L) V::store(out + i, V::add(V::mul(V::load(a + i), vs), vb));
    for (; i < n; ++i) out[i] = a[i] * s + shift;
}

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
    for (std::size_t i = 0; i < p; ++i) {
        T* crow = c + i * r;
        for (std::size_t k = 0; k < q; ++k) axpy<T>(a[i * q + k], b + k * r, crow, r);
    }
}

template <typename T>
void gather_rows(const T* table, std::size_t width, const std::int64_t* rows, std::size_t n, T* out) {
    using V = Vec<T>;
    constexpr std::size_t L = V::lanes;
    for (std::size_t k = 0; k < n; ++k) {
        const T* src = table + static_cast<std::size_t>(rows[k]) * width;
        T* dst = out + k * width;
        std::size_t i = 0;
        for (; i + L <= width; i += L) V::store(dst + i, V::load(src + i));
        if (i < width) std::memcpy(dst + i, src + i, (width - i) * sizeof(T));
    }
}

template <typename T>
constexpr KernelSet<T> make_avx2() {
    return KernelSet<T>{Isa::Avx2, &dot<T>, &axpy<T>, &add<T>, &mul<T>, &scale_shift<T>, &gemm<T>, &gather_rows<T>};
}

}  // namespace

const KernelSet<double> avx2_f64 = make_avx2<double>();
const KernelSet<float> avx2_f32 = make_avx2<float>();

}  // namespace memcom::kernels::detail
