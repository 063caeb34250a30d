#pragma once
// Collision analytics for hashed tables and the multiplier uniqueness audit.

#include <cstdint>

#include "memcom/scheme.hpp"

namespace memcom {

enum class HashFamily { Naive, Double };

/// Closed form v/m - 1 + (1 - 1/m)^v (naive) or with m^2 in place of m
/// (double hashing). Equals the expected number of colliding categories per
/// bucket, i.e. E[v - occupied] / buckets.
double expected_collisions(std::uint64_t v, std::uint64_t m, HashFamily family);

/// Exact variance of (v - occupied) / buckets under uniform hashing.
double collision_statistic_variance(std::uint64_t v, std::uint64_t m, HashFamily family);

struct CollisionSimulation {
    double mean = 0.0;
    double sample_stddev = 0.0;
    double standard_error = 0.0;  // analytic stddev / sqrt(trials)
    std::uint64_t trials = 0;
};

/// Monte Carlo of (v - occupied) / buckets with uniformly random bucket
/// assignment (two independent draws per category for double hashing).
CollisionSimulation simulate_collisions(std::uint64_t v, std::uint64_t m, HashFamily family, std::uint64_t trials,
                                        std::uint64_t seed);

struct UniquenessReport {
    std::uint64_t pairs_checked = 0;
    double fraction_distinct = 0.0;
    bool sampled = false;
};

inline constexpr std::uint64_t kUniquenessExactLimit = 10'000'000;
inline constexpr std::uint64_t kUniquenessSamples = 1'000'000;

/// Fraction of same-bucket id pairs (i mod m equal) whose multipliers differ
/// by more than `threshold`. Exact when the pair count is at most
/// kUniquenessExactLimit, otherwise kUniquenessSamples seeded samples.
UniquenessReport uniqueness_audit(const SchemeParams& params, double threshold = 1e-5, std::uint64_t seed = 0);

}  // namespace memcom
