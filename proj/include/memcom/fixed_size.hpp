#pragma once
// Fixed model-size search: for each bucket count, the widest embedding whose
// whole model (all layers, 4 bytes per parameter) fits a byte budget.

#include <optional>
#include <vector>

#include "memcom/network.hpp"

namespace memcom {

struct FixedSizeQuery {
    std::size_t budget_bytes = 0;
    SchemeKind kind = SchemeKind::MEmComNoBias;
    std::size_t v = 0;
    std::size_t num_labels = 0;
    std::vector<std::size_t> buckets;
    Variant variant = Variant::Classifier;
    std::size_t input_len = kDefaultInputLen;
    std::size_t max_dim = 1024;
};

struct FixedSizeEntry {
    std::size_t m = 0;
    std::optional<std::size_t> e;  // empty: infeasible at this m
    std::size_t bytes = 0;         // model bytes at e (0 when infeasible)
};

/// Model bytes (4 per trainable parameter) of one configuration.
std::size_t model_bytes(const FixedSizeQuery& q, std::size_t m, std::size_t e);

std::vector<FixedSizeEntry> fixed_size_search(const FixedSizeQuery& q);

}  // namespace memcom
