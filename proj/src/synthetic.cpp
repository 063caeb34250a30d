#include "memcom/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "memcom/error.hpp"

namespace memcom {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::vector<double> cumulative(const std::vector<double>& w) {
    std::vector<double> c(w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) c[i] = acc += w[i];
    return c;
}

std::size_t draw(const std::vector<double>& cdf, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, cdf.back());
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

struct Tables {
    std::vector<double> countries;
    std::vector<std::vector<double>> clusters;  // per-cluster item cdf
};

Tables build_tables(const SyntheticConfig& cfg) {
    Tables t;
    std::vector<double> cw(cfg.n_countries);
    for (std::size_t k = 0; k < cw.size(); ++k) cw[k] = 1.0 / std::pow(double(k + 1), cfg.zipf_s);
    t.countries = cumulative(cw);
    std::vector<double> base(cfg.v_items);
    for (std::size_t j = 0; j < base.size(); ++j) base[j] = 1.0 / std::pow(double(j + 1), cfg.zipf_s);
    for (std::size_t c = 0; c < cfg.n_clusters; ++c) {
        auto w = base;
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (item_cluster(cfg, j) == c) w[j] *= cfg.cluster_boost;
        }
        t.clusters.push_back(cumulative(w));
    }
    return t;
}

UserRecord make_user(const SyntheticConfig& cfg, const Tables& t, std::size_t index) {
    std::mt19937_64 rng(splitmix(cfg.seed ^ splitmix(index + 0x5EED)));
    const std::size_t cluster = std::uniform_int_distribution<std::size_t>(0, cfg.n_clusters - 1)(rng);
    // Half the users live in their cluster's home country.
    const bool home = std::bernoulli_distribution(0.5)(rng);
    const std::size_t country = home ? cluster % cfg.n_countries : draw(t.countries, rng);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(cfg.min_len, cfg.max_len)(rng);

    // Draws are independent, so repeat interactions occur and the pooled
    // interaction counts follow the Zipf mixture exactly.
    UserRecord r{"u" + std::to_string(index), "c" + std::to_string(country), {}};
    const auto& cdf = t.clusters[cluster];
    for (std::size_t k = 0; k < len; ++k) r.items.push_back("i" + std::to_string(draw(cdf, rng)));
    return r;
}

}  // namespace

void SyntheticConfig::validate() const {
    if (v_items < 1) throw ConfigError("synthetic v_items must be >= 1");
    if (!(zipf_s > 0.0)) throw ConfigError("synthetic zipf_s must be > 0");
    if (min_len > max_len) throw ConfigError("synthetic min_len must not exceed max_len");
    if (n_countries < 1 || n_clusters < 1) throw ConfigError("synthetic n_countries and n_clusters must be >= 1");
    if (!(cluster_boost > 0.0)) throw ConfigError("synthetic cluster_boost must be > 0");
}

KeyValues SyntheticConfig::to_key_values() const {
    KeyValues kv;
    kv["v_items"] = std::to_string(v_items);
    kv["n_users"] = std::to_string(n_users);
    kv["zipf_s"] = format_double(zipf_s);
    kv["min_len"] = std::to_string(min_len);
    kv["max_len"] = std::to_string(max_len);
    kv["n_countries"] = std::to_string(n_countries);
    kv["n_clusters"] = std::to_string(n_clusters);
    kv["cluster_boost"] = format_double(cluster_boost);
    kv["seed"] = std::to_string(seed);
    kv["first_user"] = std::to_string(first_user);
    return kv;
}

SyntheticConfig SyntheticConfig::from_key_values(const KeyValues& kv) {
    SyntheticConfig c;
    c.v_items = kv_uint(kv, "v_items", c.v_items);
    c.n_users = kv_uint(kv, "n_users", c.n_users);
    c.zipf_s = kv_double(kv, "zipf_s", c.zipf_s);
    c.min_len = kv_uint(kv, "min_len", c.min_len);
    c.max_len = kv_uint(kv, "max_len", c.max_len);
    c.n_countries = kv_uint(kv, "n_countries", c.n_countries);
    c.n_clusters = kv_uint(kv, "n_clusters", c.n_clusters);
    c.cluster_boost = kv_double(kv, "cluster_boost", c.cluster_boost);
    c.seed = kv_uint(kv, "seed", c.seed);
    c.first_user = kv_uint(kv, "first_user", c.first_user);
    c.validate();
    return c;
}

std::size_t item_cluster(const SyntheticConfig& cfg, std::size_t item) {
    return splitmix(cfg.seed * 0x100000001B3ull + item) % cfg.n_clusters;
}

UserRecord generate_user(const SyntheticConfig& cfg, std::size_t user_index) {
    cfg.validate();
    return make_user(cfg, build_tables(cfg), user_index);
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    const Tables t = build_tables(cfg);
    Dataset data;
    data.reserve(cfg.n_users);
    for (std::size_t u = 0; u < cfg.n_users; ++u) data.push_back(make_user(cfg, t, cfg.first_user + u));
    return data;
}

KeyValues synthetic_manifest(const SyntheticConfig& cfg, const Dataset& data) {
    KeyValues kv;
    for (auto& [k, v] : cfg.to_key_values()) kv["generator." + k] = v;
    std::unordered_set<std::string> items, countries;
    std::size_t interactions = 0;
    for (const auto& r : data) {
        countries.insert(r.country);
        for (const auto& i : r.items) items.insert(i);
        interactions += r.items.size();
    }
    kv["users"] = std::to_string(data.size());
    kv["distinct_items"] = std::to_string(items.size());
    kv["distinct_countries"] = std::to_string(countries.size());
    kv["interactions"] = std::to_string(interactions);
    kv["vocab_size"] = std::to_string(items.size() + countries.size() + 1);
    return kv;
}

}  // namespace memcom
