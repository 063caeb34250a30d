#include "memcom/collisions.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "memcom/error.hpp"

namespace memcom {
namespace {

double bucket_count(std::uint64_t m, HashFamily family) {
    const double md = static_cast<double>(m);
    return family == HashFamily::Naive ? md : md * md;
}

}  // namespace

double expected_collisions(std::uint64_t v, std::uint64_t m, HashFamily family) {
    const double vd = static_cast<double>(v);
    const double mm = bucket_count(m, family);
    // (1 - 1/m)^v via log1p keeps precision for large m.
    return vd / mm - 1.0 + std::exp(vd * std::log1p(-1.0 / mm));
}

double collision_statistic_variance(std::uint64_t v, std::uint64_t m, HashFamily family) {
    const double vd = static_cast<double>(v);
    const double mm = bucket_count(m, family);
    // Empty-bucket count E: Var(E) = M(M-1)(1-2/M)^v + M(1-1/M)^v - M^2 (1-1/M)^{2v}.
    const double p1 = std::exp(vd * std::log1p(-1.0 / mm));
    const double p2 = mm > 1.0 ? std::exp(vd * std::log1p(-2.0 / mm)) : 0.0;
    const double var_empty = mm * (mm - 1.0) * p2 + mm * p1 - mm * mm * p1 * p1;
    return std::max(var_empty, 0.0) / (mm * mm);
}

CollisionSimulation simulate_collisions(std::uint64_t v, std::uint64_t m, HashFamily family, std::uint64_t trials,
                                        std::uint64_t seed) {
    if (v < 1 || m < 1 || trials < 1) throw ArgumentError("simulate_collisions needs v, m, trials >= 1");
    const auto buckets = static_cast<std::uint64_t>(bucket_count(m, family));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> draw(0, m - 1);
    std::vector<std::uint32_t> stamp(buckets, 0);
    double sum = 0.0, sum_sq = 0.0;
    for (std::uint64_t t = 1; t <= trials; ++t) {
        std::uint64_t occupied = 0;
        for (std::uint64_t i = 0; i < v; ++i) {
            std::uint64_t b = draw(rng);
            if (family == HashFamily::Double) b = b * m + draw(rng);
            if (stamp[b] != t) {
                stamp[b] = static_cast<std::uint32_t>(t);
                ++occupied;
            }
        }
        const double stat = (static_cast<double>(v) - static_cast<double>(occupied)) / static_cast<double>(buckets);
        sum += stat;
        sum_sq += stat * stat;
    }
    const double n = static_cast<double>(trials);
    CollisionSimulation s;
    s.trials = trials;
    s.mean = sum / n;
    s.sample_stddev = trials > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * s.mean * s.mean) / (n - 1.0))) : 0.0;
    s.standard_error = std::sqrt(collision_statistic_variance(v, m, family) / n);
    return s;
}

UniquenessReport uniqueness_audit(const SchemeParams& params, double threshold, std::uint64_t seed) {
    const auto& c = params.config;
    if (!is_memcom(c.kind) || !params.V) {
        throw ConfigError("uniqueness audit needs a MEmCom scheme, got " + std::string(kind_name(c.kind)));
    }
    const std::uint64_t v = c.vocab, m = c.buckets;
    const Tensor& mult = params.V->value;
    // Ids in bucket r are r, r+m, r+2m, ...; bucket r holds ceil((v-r)/m) ids.
    auto bucket_size = [&](std::uint64_t r) { return r < v ? (v - r + m - 1) / m : 0; };
    std::uint64_t total_pairs = 0;
    for (std::uint64_t r = 0; r < m; ++r) {
        const auto n = bucket_size(r);
        total_pairs += n * (n - 1) / 2;
    }
    UniquenessReport rep;
    if (total_pairs == 0) return rep;
    std::uint64_t distinct = 0;
    if (total_pairs <= kUniquenessExactLimit) {
        for (std::uint64_t r = 0; r < m; ++r) {
            for (std::uint64_t i = r; i < v; i += m) {
                for (std::uint64_t j = i + m; j < v; j += m) {
                    if (std::abs(mult[i] - mult[j]) > threshold) ++distinct;
                }
            }
        }
        rep.pairs_checked = total_pairs;
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::uint64_t> pick_id(0, v - 1);
        std::uint64_t drawn = 0;
        while (drawn < kUniquenessSamples) {
            const auto i = pick_id(rng);
            const auto n = bucket_size(i % m);
            if (n < 2) continue;
            std::uniform_int_distribution<std::uint64_t> pick_slot(0, n - 2);
            auto slot = pick_slot(rng);
            if (slot >= i / m) ++slot;  // skip i itself
            const auto j = (i % m) + slot * m;
            if (std::abs(mult[i] - mult[j]) > threshold) ++distinct;
            ++drawn;
        }
        rep.pairs_checked = drawn;
        rep.sampled = true;
    }
    rep.fraction_distinct = static_cast<double>(distinct) / static_cast<double>(rep.pairs_checked);
    return rep;
}

}  // namespace memcom
