#include "memcom/microbench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>

#include "memcom/error.hpp"
#include "memcom/kernels.hpp"

namespace memcom {
namespace {

// Tracks live and peak bytes of the buffers one inference allocates.
struct AllocStats {
    static inline std::atomic<std::size_t> live{0};
    static inline std::atomic<std::size_t> peak{0};
    static void reset() {
        live = 0;
        peak = 0;
    }
};

template <typename T>
struct CountingAllocator {
    using value_type = T;
    CountingAllocator() = default;
    template <typename U>
    CountingAllocator(const CountingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        const std::size_t now = AllocStats::live += n * sizeof(T);
        std::size_t prev = AllocStats::peak.load();
        while (now > prev && !AllocStats::peak.compare_exchange_weak(prev, now)) {
        }
        return std::allocator<T>{}.allocate(n);
    }
    void deallocate(T* p, std::size_t n) noexcept {
        AllocStats::live -= n * sizeof(T);
        std::allocator<T>{}.deallocate(p, n);
    }
    template <typename U>
    bool operator==(const CountingAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using CountedVec = std::vector<T, CountingAllocator<T>>;

template <typename T>
std::vector<T> random_table(std::size_t rows, std::size_t e, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<T> t(rows * e);
    for (auto& x : t) x = static_cast<T>(u(rng));
    return t;
}

template <typename T>
void table_path(const kernels::KernelSet<T>& k, const std::vector<T>& table, std::size_t e, std::size_t m,
                const std::int64_t* ids, std::size_t b, T* result) {
    CountedVec<std::int64_t> rows(b);
    for (std::size_t i = 0; i < b; ++i) rows[i] = ids[i] % static_cast<std::int64_t>(m);
    CountedVec<T> out(b * e);
    k.gather_rows(table.data(), e, rows.data(), b, out.data());
    std::copy(out.begin(), out.end(), result);
}

template <typename T>
void onehot_path(const kernels::KernelSet<T>& k, const std::vector<T>& table, std::size_t e, std::size_t m,
                 const std::int64_t* ids, std::size_t b, T* result) {
    CountedVec<T> onehot(b * m, T(0));
    for (std::size_t i = 0; i < b; ++i) onehot[i * m + static_cast<std::size_t>(ids[i] % static_cast<std::int64_t>(m))] = T(1);
    CountedVec<T> out(b * e, T(0));
    k.gemm(onehot.data(), table.data(), out.data(), b, m, e);
    std::copy(out.begin(), out.end(), result);
}

template <typename F>
double median_ns(std::size_t warmup, std::size_t iterations, F&& body) {
    for (std::size_t i = 0; i < warmup; ++i) body(i);
    std::vector<double> ns;
    ns.reserve(iterations);
    for (std::size_t i = 0; i < iterations; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        body(warmup + i);
        ns.push_back(std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(ns.begin(), ns.begin() + static_cast<std::ptrdiff_t>(ns.size() / 2), ns.end());
    return ns[ns.size() / 2];
}

}  // namespace

void MicrobenchConfig::validate() const {
    if (v < 1 || e < 1 || m < 1 || batch < 1 || iterations < 1) {
        throw ConfigError("microbench needs v, e, m, batch and iterations >= 1");
    }
    if (m > v) throw ConfigError("microbench bucket count must not exceed v");
}

MicrobenchResult microbench_lookup_vs_onehot(const MicrobenchConfig& cfg) {
    cfg.validate();
    const auto& k = kernels::active<float>();
    const auto table = random_table<float>(cfg.m, cfg.e, cfg.seed);
    const std::size_t rounds = cfg.warmup + cfg.iterations;
    std::vector<std::int64_t> ids(rounds * cfg.batch);
    std::mt19937_64 rng(cfg.seed + 1);
    std::uniform_int_distribution<std::int64_t> pick(0, static_cast<std::int64_t>(cfg.v) - 1);
    for (auto& id : ids) id = pick(rng);
    std::vector<float> sink(cfg.batch * cfg.e);

    MicrobenchResult r;
    r.table_ns_per_inference = median_ns(cfg.warmup, cfg.iterations, [&](std::size_t i) {
        table_path(k, table, cfg.e, cfg.m, ids.data() + i * cfg.batch, cfg.batch, sink.data());
    }) / double(cfg.batch);
    r.onehot_ns_per_inference = median_ns(cfg.warmup, cfg.iterations, [&](std::size_t i) {
        onehot_path(k, table, cfg.e, cfg.m, ids.data() + i * cfg.batch, cfg.batch, sink.data());
    }) / double(cfg.batch);

    AllocStats::reset();
    table_path(k, table, cfg.e, cfg.m, ids.data(), cfg.batch, sink.data());
    r.table_peak_bytes = AllocStats::peak;
    AllocStats::reset();
    onehot_path(k, table, cfg.e, cfg.m, ids.data(), cfg.batch, sink.data());
    r.onehot_peak_bytes = AllocStats::peak;

    r.table_predicted_values = cfg.batch * (cfg.e + 1);
    r.onehot_predicted_values = cfg.batch * (cfg.e + cfg.v);
    return r;
}

EmbeddingPaths embedding_paths_f64(std::size_t v, std::size_t e, std::size_t m, const std::vector<std::int64_t>& ids,
                                   std::uint64_t seed) {
    MicrobenchConfig c;
    c.v = v;
    c.e = e;
    c.m = m;
    c.validate();
    for (auto id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= v) throw IndexError("id outside vocabulary", id);
    }
    const auto& k = kernels::active<double>();
    const auto table = random_table<double>(m, e, seed);
    EmbeddingPaths p{std::vector<double>(ids.size() * e), std::vector<double>(ids.size() * e)};
    table_path(k, table, e, m, ids.data(), ids.size(), p.table.data());
    onehot_path(k, table, e, m, ids.data(), ids.size(), p.onehot.data());
    return p;
}

}  // namespace memcom
