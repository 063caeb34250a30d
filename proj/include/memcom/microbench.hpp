#pragma once
// Embedding-stage microbenchmark: row gather from a hashed m x e table
// versus one-hot construction followed by a dense matmul against the table.
// Runs in 32-bit floats on the calling thread.

#include <cstdint>
#include <vector>

namespace memcom {

struct MicrobenchConfig {
    std::size_t v = 100'000;
    std::size_t e = 256;
    std::size_t m = 100'000;
    std::size_t batch = 1;
    std::size_t iterations = 50;
    std::size_t warmup = 10;
    std::uint64_t seed = 7;

    void validate() const;
};

struct MicrobenchResult {
    double table_ns_per_inference = 0.0;   // median over iterations / batch
    double onehot_ns_per_inference = 0.0;
    std::size_t table_peak_bytes = 0;      // measured transient allocations
    std::size_t onehot_peak_bytes = 0;
    std::size_t table_predicted_values = 0;   // b * (e + 1)
    std::size_t onehot_predicted_values = 0;  // b * (e + v)
    double speedup() const { return table_ns_per_inference > 0 ? onehot_ns_per_inference / table_ns_per_inference : 0; }
};

MicrobenchResult microbench_lookup_vs_onehot(const MicrobenchConfig& cfg);

/// Both paths in 64-bit on the same table and ids. With m = v they must agree
/// bit for bit.
struct EmbeddingPaths {
    std::vector<double> table;
    std::vector<double> onehot;
};
EmbeddingPaths embedding_paths_f64(std::size_t v, std::size_t e, std::size_t m, const std::vector<std::int64_t>& ids,
                                   std::uint64_t seed);

}  // namespace memcom
