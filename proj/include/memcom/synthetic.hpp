#pragma once
// Synthetic power-law interaction data.
//
// Item popularity follows Zipf(s). Each user belongs to one of a few latent
// clusters; each cluster boosts the weight of its "home" items, so a user's
// history carries learnable signal about their next item. Draws within a
// history are independent, so items can repeat. Every user is
// generated from its own (seed, index) stream, so histories do not depend on
// generation order.

#include <cstdint>
#include <filesystem>

#include "memcom/config_file.hpp"
#include "memcom/dataset.hpp"

namespace memcom {

struct SyntheticConfig {
    std::size_t v_items = 10'000;
    std::size_t n_users = 20'000;
    double zipf_s = 1.1;
    std::size_t min_len = 2;  // history length ~ uniform [min_len, max_len]
    std::size_t max_len = 40;
    std::size_t n_countries = 20;
    std::size_t n_clusters = 8;
    double cluster_boost = 10.0;  // weight multiplier for a cluster's home items
    std::uint64_t seed = 1;
    std::size_t first_user = 0;  // index of the first generated user

    void validate() const;
    KeyValues to_key_values() const;
    static SyntheticConfig from_key_values(const KeyValues& kv);
};

/// Home cluster of an item; stable across configs with the same seed.
std::size_t item_cluster(const SyntheticConfig& cfg, std::size_t item);

UserRecord generate_user(const SyntheticConfig& cfg, std::size_t user_index);
Dataset generate_synthetic(const SyntheticConfig& cfg);

/// Manifest: the generator config plus observed counts of the dataset.
KeyValues synthetic_manifest(const SyntheticConfig& cfg, const Dataset& data);

}  // namespace memcom
