#pragma once
// Compression sweeps: every scheme over its grid, repeated over seeds, each
// point reported relative to the same-seed uncompressed baseline.

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "memcom/dataset.hpp"
#include "memcom/network.hpp"
#include "memcom/report.hpp"
#include "memcom/synthetic.hpp"
#include "memcom/train.hpp"
#include "memcom/vocab.hpp"

namespace memcom {

enum class SweepMetric { Accuracy, Ndcg };

std::string_view metric_name(SweepMetric m);
SweepMetric parse_metric(std::string_view name);

struct DataSpec {
    std::filesystem::path dataset_path;  // TSV; empty means synthetic
    SyntheticConfig synthetic;
    std::size_t max_items = 0;      // input vocabulary cap by frequency rank (0: none)
    std::size_t num_labels = 1000;  // output vocabulary: the most frequent items (0: all)
    std::size_t eval_every = 10;    // every n-th user is held out for evaluation
    ExampleOptions examples;
};

struct SweepData {
    VocabMap vocab;
    ExampleBatch train;
    ExampleBatch eval;
    std::optional<PairwiseBatch> pairs;  // RankNet training pairs
    std::size_t num_labels = 0;
    ExampleStats train_stats;
    ExampleStats eval_stats;

    std::size_t v() const { return vocab.size(); }
};

SweepData prepare_data(const DataSpec& spec, const Dataset& records, bool pairwise = false);
SweepData prepare_data(const DataSpec& spec, bool pairwise = false);

struct SweepConfig {
    DataSpec data;
    Variant variant = Variant::Classifier;
    std::vector<SchemeKind> kinds;
    std::vector<std::size_t> bucket_grid;  // empty: {v, v/2, v/4, v/10, v/20, v/100}
    std::vector<std::size_t> dim_grid;     // empty: {128, 64, 32, 16, 8, 4}
    /// When set, bucketed kinds take the largest m whose embedding
    /// compression reaches each ratio instead of the bucket grid.
    std::vector<double> compression_grid;
    std::size_t embed_dim = 256;  // baseline width, also used by bucketed kinds
    std::size_t repeats = 3;
    std::uint64_t base_seed = 1;  // seeds base_seed .. base_seed + repeats - 1
    SweepMetric metric = SweepMetric::Accuracy;
    TrainConfig train;
    double dropout_rate = 0.2;
    std::size_t workers = 1;
    /// Called after each successful point. Must be thread-safe when workers > 1.
    std::function<void(const RunReport&, Network&, const SweepData&)> on_trained;

    void validate() const;
};

std::vector<std::size_t> default_bucket_grid(std::size_t v);
std::vector<std::size_t> default_dim_grid();

/// Largest m whose embedding parameter count is at most v*e/ratio.
/// Throws ConfigError when no m qualifies.
std::size_t buckets_for_compression(SchemeKind kind, std::size_t v, std::size_t e, double ratio);

/// Scheme configs for one sweep (baseline first), deduplicated.
std::vector<SchemeConfig> expand_grid(const SweepConfig& cfg, std::size_t v);

std::vector<RunReport> run_sweep(const SweepConfig& cfg, const SweepData& data);
std::vector<RunReport> run_sweep(const SweepConfig& cfg);

struct SummaryRow {
    std::string scheme;
    std::string kind_params;
    double compression_ratio = 0.0;
    double mean_metric = 0.0;
    double mean_relative_loss_pct = 0.0;
    std::size_t runs = 0;
    std::size_t errors = 0;
};

/// Mean over seeds of every grid point.
std::vector<SummaryRow> summarize(const std::vector<RunReport>& reports);

}  // namespace memcom
