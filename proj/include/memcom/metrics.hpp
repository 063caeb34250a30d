#pragma once
// Accuracy and single-positive nDCG.
//
// nDCG with one relevant item is 1 / log2(1 + rank), rank starting at 1. The
// rank of the label counts candidates scoring strictly higher plus those
// scoring equal with a smaller index, so ties resolve toward smaller ids just
// like argmax does for accuracy.

#include <cstdint>
#include <optional>
#include <span>

#include "memcom/dataset.hpp"
#include "memcom/network.hpp"
#include "memcom/train.hpp"

namespace memcom {

/// 1-based rank of scores[label] under descending score, ties by index.
std::size_t label_rank(std::span<const double> scores, std::size_t label);

/// 1/log2(1 + rank); zero when a cutoff k is given and rank > k.
double ndcg_at_rank(std::size_t rank, std::optional<std::size_t> k = std::nullopt);

/// Argmax index, ties to the smallest index.
std::size_t argmax(std::span<const double> scores);

struct MetricSums {
    double correct = 0.0;
    double ndcg = 0.0;
    std::size_t count = 0;

    MetricSums& operator+=(const MetricSums& o);
    double accuracy() const { return count ? correct / double(count) : 0.0; }
    double mean_ndcg() const { return count ? ndcg / double(count) : 0.0; }
};

/// Per-row metrics of a b x num_labels score matrix. Throws IndexError for a
/// label outside [0, num_labels).
MetricSums score_metrics(const Tensor& scores, std::span<const std::int64_t> labels,
                         std::optional<std::size_t> k = std::nullopt);

/// Evaluation-mode accuracy over the full output vocabulary.
double evaluate_accuracy(Network& net, const ExampleBatch& eval, std::size_t batch_size = 512);
double evaluate_ndcg(Network& net, const ExampleBatch& eval, std::optional<std::size_t> k = std::nullopt,
                     std::size_t batch_size = 512);

/// Both metrics in one pass. RankNet networks score every candidate item
/// (label index < num_labels, item id = first_item_id + label) per user;
/// accuracy is then the fraction of examples whose label ranks first.
MetricReport evaluate(Network& net, const ExampleBatch& eval, std::int64_t first_item_id = 0,
                      std::optional<std::size_t> k = std::nullopt, std::size_t batch_size = 512);

}  // namespace memcom
