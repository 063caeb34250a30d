#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "memcom/error.hpp"

namespace memcom::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(MEMCOM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa initial_isa() {
    Isa isa = cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
    if (const char* env = std::getenv("MEMCOM_ISA")) {
        const std::string want(env);
        if (want == "scalar") isa = Isa::Scalar;
        else if (want == "avx2" && cpu_has_avx2()) isa = Isa::Avx2;
    }
    return isa;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool isa_available(Isa isa) {
    if (isa == Isa::Scalar) return true;
    return cpu_has_avx2();
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
    if (!isa_available(isa)) throw ConfigError("kernel variant '" + std::string(isa_name(isa)) + "' is not available");
    current().store(isa, std::memory_order_relaxed);
}

template <>
const KernelSet<double>& scalar_kernels<double>() { return detail::scalar_f64; }
template <>
const KernelSet<float>& scalar_kernels<float>() { return detail::scalar_f32; }

template <>
const KernelSet<double>* kernels_for<double>(Isa isa) {
    if (!isa_available(isa)) return nullptr;
#if defined(MEMCOM_HAVE_AVX2)
    if (isa == Isa::Avx2) return &detail::avx2_f64;
#endif
    return &detail::scalar_f64;
}

template <>
const KernelSet<float>* kernels_for<float>(Isa isa) {
    if (!isa_available(isa)) return nullptr;
#if defined(MEMCOM_HAVE_AVX2)
    if (isa == Isa::Avx2) return &detail::avx2_f32;
#endif
    return &detail::scalar_f32;
}

template <>
const KernelSet<double>& active<double>() { return *kernels_for<double>(active_isa()); }
template <>
const KernelSet<float>& active<float>() { return *kernels_for<float>(active_isa()); }

}  // namespace memcom::kernels
