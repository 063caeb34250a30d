#include "memcom/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "memcom/checkpoint.hpp"
#include "memcom/error.hpp"

namespace memcom {

std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::Classifier: return "classifier";
        case Variant::PointwiseRanker: return "pointwise";
        case Variant::PairwiseRankNet: return "ranknet";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    for (auto v : {Variant::Classifier, Variant::PointwiseRanker, Variant::PairwiseRankNet}) {
        if (variant_name(v) == name) return v;
    }
    throw ConfigError("unknown network variant '" + std::string(name) + "'");
}

void NetworkSpec::validate() const {
    scheme.validate();
    if (input_len < 1) throw ConfigError("input length must be >= 1");
    if (variant != Variant::PairwiseRankNet && num_labels < 1) throw ConfigError("num_labels must be >= 1");
    if (variant != Variant::PointwiseRanker && scheme.embed_dim < 2) {
        throw ConfigError("embedding size must be >= 2 so the hidden layer has e/2 >= 1 units");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
}

KeyValues NetworkSpec::to_key_values() const {
    KeyValues kv = scheme.to_key_values("scheme.");
    kv["variant"] = std::string(variant_name(variant));
    kv["input_len"] = std::to_string(input_len);
    kv["num_labels"] = std::to_string(num_labels);
    kv["dropout_rate"] = format_double(dropout_rate);
    return kv;
}

NetworkSpec NetworkSpec::from_key_values(const KeyValues& kv) {
    NetworkSpec s;
    s.variant = parse_variant(kv_require(kv, "variant"));
    s.scheme = SchemeConfig::from_key_values(kv, "scheme.");
    s.input_len = kv_uint(kv, "input_len", kDefaultInputLen);
    s.num_labels = kv_uint(kv, "num_labels", 0);
    s.dropout_rate = kv_double(kv, "dropout_rate", 0.2);
    return s;
}

ParamBreakdown count_network_params(const NetworkSpec& spec) {
    spec.validate();
    const std::size_t e = spec.embed_out(), h = spec.hidden_units(), L = spec.num_labels;
    ParamBreakdown p;
    p.embedding = count_params(spec.scheme).embedding_params;
    switch (spec.variant) {
        case Variant::Classifier:
            p.dense = (e * h + h) + (h * L + L);
            p.batchnorm = 2 * e + 2 * h;
            break;
        case Variant::PointwiseRanker:
            p.dense = e * L + L;
            p.batchnorm = 2 * e;
            break;
        case Variant::PairwiseRankNet:
            p.dense = (2 * e * h + h) + (h + 1);
            p.batchnorm = 2 * e;
            break;
    }
    return p;
}

namespace {

constexpr std::size_t kPoolChunk = 32;

IdBatch slice_rows(const IdBatch& ids, std::size_t begin, std::size_t end) {
    return IdBatch(end - begin, ids.cols,
                   std::vector<std::int64_t>(ids.ids.begin() + static_cast<std::ptrdiff_t>(begin * ids.cols),
                                             ids.ids.begin() + static_cast<std::ptrdiff_t>(end * ids.cols)));
}

void glorot_init(ops::Dense& d, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(d.in_features() + d.out_features()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& w : d.weight.value.data()) w = u(rng);
}

}  // namespace

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    scheme_ = build_scheme(spec_.scheme, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const std::size_t e = spec_.embed_out(), h = spec_.hidden_units();
    bn1_ = ops::BatchNorm(e);
    switch (spec_.variant) {
        case Variant::Classifier:
            dense1_ = ops::Dense(e, h);
            bn2_ = ops::BatchNorm(h);
            out_ = ops::Dense(h, spec_.num_labels);
            glorot_init(dense1_, rng);
            break;
        case Variant::PointwiseRanker: out_ = ops::Dense(e, spec_.num_labels); break;
        case Variant::PairwiseRankNet:
            dense1_ = ops::Dense(2 * e, h);
            out_ = ops::Dense(h, 1);
            glorot_init(dense1_, rng);
            break;
    }
    glorot_init(out_, rng);
}

std::vector<std::pair<std::string, GradPair*>> Network::parameters() {
    std::vector<std::pair<std::string, GradPair*>> r;
    for (auto& [name, gp] : scheme_.registry()) r.emplace_back("embed." + name, gp);
    r.emplace_back("bn1.gamma", &bn1_.gamma);
    r.emplace_back("bn1.beta", &bn1_.beta);
    if (spec_.variant != Variant::PointwiseRanker) {
        r.emplace_back("dense1.weight", &dense1_.weight);
        r.emplace_back("dense1.bias", &dense1_.bias);
    }
    if (spec_.variant == Variant::Classifier) {
        r.emplace_back("bn2.gamma", &bn2_.gamma);
        r.emplace_back("bn2.beta", &bn2_.beta);
    }
    r.emplace_back("out.weight", &out_.weight);
    r.emplace_back("out.bias", &out_.bias);
    return r;
}

std::vector<std::pair<std::string, const GradPair*>> Network::parameters() const {
    std::vector<std::pair<std::string, const GradPair*>> r;
    for (auto& [name, gp] : const_cast<Network*>(this)->parameters()) r.emplace_back(name, gp);
    return r;
}

std::vector<std::pair<std::string, Tensor*>> Network::buffers() {
    std::vector<std::pair<std::string, Tensor*>> r{{"bn1.running_mean", &bn1_.running_mean},
                                                   {"bn1.running_var", &bn1_.running_var}};
    if (spec_.variant == Variant::Classifier) {
        r.emplace_back("bn2.running_mean", &bn2_.running_mean);
        r.emplace_back("bn2.running_var", &bn2_.running_var);
    }
    return r;
}

std::vector<std::pair<std::string, const Tensor*>> Network::buffers() const {
    std::vector<std::pair<std::string, const Tensor*>> r;
    for (auto& [name, t] : const_cast<Network*>(this)->buffers()) r.emplace_back(name, t);
    return r;
}

std::size_t Network::trainable_count() const {
    std::size_t n = 0;
    for (const auto& [name, gp] : parameters()) n += gp->value.size();
    return n;
}

ParamBreakdown Network::param_breakdown() const {
    ParamBreakdown p;
    for (const auto& [name, gp] : parameters()) {
        if (name.starts_with("embed.")) p.embedding += gp->value.size();
        else if (name.starts_with("bn")) p.batchnorm += gp->value.size();
        else p.dense += gp->value.size();
    }
    return p;
}

void Network::zero_grad() {
    for (auto& [name, gp] : parameters()) gp->zero_grad();
}

Tensor Network::user_tower(const IdBatch& ids, bool train, std::mt19937_64& rng, ForwardCache& cache,
                           bool update_running) {
    if (ids.cols != spec_.input_len) {
        throw DimensionError("input rows must have length " + std::to_string(spec_.input_len) + ", got " +
                             std::to_string(ids.cols));
    }
    cache.ids = ids;
    cache.train = train;
    const std::size_t b = ids.rows, e = spec_.embed_out();
    cache.pooled = Tensor({b, e}, 0.0);
    // Embed and pool a few rows at a time so the b x l x e lookup never
    // materializes in full; per-row arithmetic is unchanged.
    for (std::size_t start = 0; start < b; start += kPoolChunk) {
        const IdBatch chunk = slice_rows(ids, start, std::min(b, start + kPoolChunk));
        const Tensor pooled = ops::average_pool_rows(lookup(scheme_, chunk), spec_.input_len);
        std::copy(pooled.data().begin(), pooled.data().end(), cache.pooled.raw() + start * e);
    }
    auto drop = ops::dropout(ops::relu(cache.pooled), spec_.dropout_rate, train, rng);
    cache.drop1_mask = std::move(drop.mask);
    cache.user = ops::batchnorm_forward(bn1_, drop.out, train, cache.bn1, update_running);
    return cache.user;
}

void Network::user_tower_backward(const ForwardCache& cache, const Tensor& duser) {
    const std::size_t b = cache.ids.rows, e = spec_.embed_out();
    Tensor g = ops::batchnorm_backward(bn1_, cache.bn1, duser);
    g = ops::dropout_backward(cache.drop1_mask, g);
    g = ops::relu_backward(cache.pooled, g);
    for (std::size_t start = 0; start < b; start += kPoolChunk) {
        const std::size_t end = std::min(b, start + kPoolChunk);
        const Tensor dpooled({end - start, 1, e},
                             std::vector<double>(g.raw() + start * e, g.raw() + end * e));
        lookup_backward(scheme_, slice_rows(cache.ids, start, end),
                        ops::average_pool_rows_backward(dpooled, spec_.input_len));
    }
}

ForwardResult Network::forward(const IdBatch& ids, bool train, std::mt19937_64& rng) {
    if (spec_.variant == Variant::PairwiseRankNet) throw ConfigError("forward() is not defined for the RankNet variant");
    ForwardResult r;
    auto& c = r.cache;
    user_tower(ids, train, rng, c);
    if (spec_.variant == Variant::Classifier) {
        c.hidden_pre = ops::dense_forward(dense1_, c.user);
        auto drop = ops::dropout(ops::relu(c.hidden_pre), spec_.dropout_rate, train, rng);
        c.drop2_mask = std::move(drop.mask);
        c.hidden = ops::batchnorm_forward(bn2_, drop.out, train, c.bn2);
    } else {
        c.hidden = c.user;
    }
    r.logits = ops::dense_forward(out_, c.hidden);
    return r;
}

void Network::backward(const ForwardCache& cache, const Tensor& dlogits) {
    Tensor g = ops::dense_backward(out_, cache.hidden, dlogits);
    if (spec_.variant == Variant::Classifier) {
        g = ops::batchnorm_backward(bn2_, cache.bn2, g);
        g = ops::dropout_backward(cache.drop2_mask, g);
        g = ops::relu_backward(cache.hidden_pre, g);
        g = ops::dense_backward(dense1_, cache.user, g);
    }
    user_tower_backward(cache, g);
}

Tensor Network::score_items(const Tensor& user, std::span<const std::int64_t> items, ItemScoreCache& cache) {
    const std::size_t b = user.dim(0), e = spec_.embed_out();
    if (items.size() != b) throw DimensionError("expected " + std::to_string(b) + " items, got " + std::to_string(items.size()));
    cache.items = IdBatch(b, 1, std::vector<std::int64_t>(items.begin(), items.end()));
    const Tensor item_emb = lookup(scheme_, cache.items);
    cache.concat = Tensor({b, 2 * e}, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        std::copy_n(user.raw() + i * e, e, cache.concat.raw() + i * 2 * e);
        std::copy_n(item_emb.raw() + i * e, e, cache.concat.raw() + i * 2 * e + e);
    }
    cache.hidden_pre = ops::dense_forward(dense1_, cache.concat);
    cache.hidden = ops::relu(cache.hidden_pre);
    return ops::dense_forward(out_, cache.hidden).reshaped({b});
}

Tensor Network::score_items_backward(const ItemScoreCache& cache, const Tensor& dscore) {
    const std::size_t b = cache.items.rows, e = spec_.embed_out();
    Tensor g = ops::dense_backward(out_, cache.hidden, dscore.reshaped({b, 1}));
    g = ops::relu_backward(cache.hidden_pre, g);
    const Tensor dconcat = ops::dense_backward(dense1_, cache.concat, g);
    Tensor duser({b, e}, 0.0);
    Tensor ditem({b, 1, e}, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        std::copy_n(dconcat.raw() + i * 2 * e, e, duser.raw() + i * e);
        std::copy_n(dconcat.raw() + i * 2 * e + e, e, ditem.raw() + i * e);
    }
    lookup_backward(scheme_, cache.items, ditem);
    return duser;
}

PairwiseResult Network::pairwise_forward(const IdBatch& users, std::span<const std::int64_t> item_hi,
                                         std::span<const std::int64_t> item_lo, bool train, std::mt19937_64& rng) {
    if (spec_.variant != Variant::PairwiseRankNet) throw ConfigError("pairwise_forward needs the RankNet variant");
    PairwiseResult r;
    const Tensor user = user_tower(users, train, rng, r.user);
    r.score_hi = score_items(user, item_hi, r.hi);
    r.score_lo = score_items(user, item_lo, r.lo);
    for (std::size_t i = 0; i < users.rows; ++i) {
        const double x = -(r.score_hi[i] - r.score_lo[i]);
        r.loss += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));  // softplus
    }
    return r;
}

void Network::pairwise_backward(const PairwiseResult& r) {
    const std::size_t b = r.score_hi.size();
    Tensor dhi({b}, 0.0), dlo({b}, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        const double d = r.score_hi[i] - r.score_lo[i];
        // d/dd log(1 + exp(-d)) = -1 / (1 + exp(d))
        const double g = d >= 0.0 ? -std::exp(-d) / (1.0 + std::exp(-d)) : -1.0 / (1.0 + std::exp(d));
        dhi[i] = g;
        dlo[i] = -g;
    }
    Tensor duser = score_items_backward(r.hi, dhi);
    const Tensor du_lo = score_items_backward(r.lo, dlo);
    for (std::size_t i = 0; i < duser.size(); ++i) duser[i] += du_lo[i];
    user_tower_backward(r.user, duser);
}

std::vector<double> Network::score_candidates(const IdBatch& user, std::span<const std::int64_t> candidates) {
    if (user.rows != 1) throw DimensionError("score_candidates takes a single user row");
    std::mt19937_64 unused(0);
    if (spec_.variant == Variant::PairwiseRankNet) {
        ForwardCache uc;
        const Tensor u = user_tower(user, false, unused, uc);
        const std::size_t e = spec_.embed_out(), n = candidates.size();
        Tensor rep({n, e}, 0.0);
        for (std::size_t i = 0; i < n; ++i) std::copy_n(u.raw(), e, rep.raw() + i * e);
        ItemScoreCache ic;
        const Tensor s = score_items(rep, candidates, ic);
        return {s.data().begin(), s.data().end()};
    }
    const auto fr = forward(user, false, unused);
    const Tensor probs = ops::softmax(fr.logits);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (auto c : candidates) {
        if (c < 0 || static_cast<std::size_t>(c) >= spec_.num_labels) {
            throw IndexError("candidate label outside [0, " + std::to_string(spec_.num_labels) + ")", c);
        }
        out.push_back(probs[static_cast<std::size_t>(c)]);
    }
    return out;
}

std::vector<std::int64_t> rank_by_scores(std::span<const double> scores, std::span<const std::int64_t> ids) {
    if (scores.size() != ids.size()) throw DimensionError("scores and ids differ in length");
    if (ids.empty()) throw ArgumentError("cannot rank an empty candidate list");
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    std::vector<std::int64_t> out;
    out.reserve(ids.size());
    for (auto i : order) out.push_back(ids[i]);
    return out;
}

std::vector<std::int64_t> rank_items(Network& net, const IdBatch& user, std::span<const std::int64_t> candidates) {
    if (candidates.empty()) throw ArgumentError("cannot rank an empty candidate list");
    const auto scores = net.score_candidates(user, candidates);
    return rank_by_scores(scores, candidates);
}

void save_network(std::ostream& out, const Network& net) {
    std::vector<std::pair<std::string, const Tensor*>> blocks;
    for (const auto& [name, gp] : net.parameters()) blocks.emplace_back(name, &gp->value);
    for (const auto& [name, t] : net.buffers()) blocks.emplace_back(name, t);
    write_checkpoint(out, net.spec().to_key_values(), blocks);
}

void save_network(const std::filesystem::path& path, const Network& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    save_network(out, net);
}

Network load_network(std::istream& in) {
    const auto ck = read_checkpoint(in);
    Network net(NetworkSpec::from_key_values(ck.header), 0);
    for (auto& [name, gp] : net.parameters()) {
        const Tensor& stored = ck.get(name);
        if (stored.shape() != gp->value.shape()) throw IoError("tensor '" + name + "' has unexpected shape");
        *gp = GradPair(stored);
    }
    for (auto& [name, t] : net.buffers()) {
        const Tensor& stored = ck.get(name);
        if (stored.shape() != t->shape()) throw IoError("tensor '" + name + "' has unexpected shape");
        *t = stored;
    }
    return net;
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return load_network(in);
}

}  // namespace memcom
