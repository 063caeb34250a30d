// Reference kernels. Plain loops in left-to-right order; the AVX2 variant is
// tested against these.

#include <cstring>

#include "kernels_impl.hpp"

namespace memcom::kernels::detail {
namespace {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale_shift(const T* a, T s, T shift, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s + shift;
}

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
    for (std::size_t i = 0; i < p; ++i) {
        T* crow = c + i * r;
        for (std::size_t k = 0; k < q; ++k) {
            const T aik = a[i * q + k];
            const T* brow = b + k * r;
            for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <typename T>
void gather_rows(const T* table, std::size_t width, const std::int64_t* rows, std::size_t n, T* out) {
    for (std::size_t k = 0; k < n; ++k) {
        std::memcpy(out + k * width, table + static_cast<std::size_t>(rows[k]) * width, width * sizeof(T));
    }
}

template <typename T>
constexpr KernelSet<T> make_scalar() {
    return KernelSet<T>{Isa::Scalar, &dot<T>, &axpy<T>, &add<T>, &mul<T>, &scale_shift<T>, &gemm<T>, &gather_rows<T>};
}

}  // namespace

const KernelSet<double> scalar_f64 = make_scalar<double>();
const KernelSet<float> scalar_f32 = make_scalar<float>();

}  // namespace memcom::kernels::detail
