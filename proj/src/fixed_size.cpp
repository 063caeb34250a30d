#include "memcom/fixed_size.hpp"

#include "memcom/error.hpp"

namespace memcom {
namespace {

NetworkSpec spec_for(const FixedSizeQuery& q, std::size_t m, std::size_t e) {
    NetworkSpec s;
    s.variant = q.variant;
    s.input_len = q.input_len;
    s.num_labels = q.num_labels;
    s.scheme.kind = q.kind;
    s.scheme.vocab = q.v;
    s.scheme.embed_dim = e;
    if (q.kind == SchemeKind::TruncateRare) s.scheme.keep_top = m;
    else s.scheme.buckets = m;
    return s;
}

// Widths must be even when two half-width tables are concatenated, and the
// classifier hidden layer needs e/2 >= 1.
std::size_t dim_step(SchemeKind kind) {
    return kind == SchemeKind::DoubleHash || kind == SchemeKind::QRConcat ? 2 : 1;
}

std::size_t min_dim(const FixedSizeQuery& q) {
    const std::size_t step = dim_step(q.kind);
    std::size_t lo = q.variant == Variant::Classifier || q.variant == Variant::PairwiseRankNet ? 2 : 1;
    return (lo + step - 1) / step * step;
}

}  // namespace

std::size_t model_bytes(const FixedSizeQuery& q, std::size_t m, std::size_t e) {
    const auto spec = spec_for(q, m, e);
    spec.validate();
    return 4 * count_network_params(spec).total();
}

std::vector<FixedSizeEntry> fixed_size_search(const FixedSizeQuery& q) {
    if (!is_bucketed(q.kind) && q.kind != SchemeKind::TruncateRare) {
        throw ConfigError(std::string(kind_name(q.kind)) + " has no bucket count to trade against embedding size");
    }
    if (q.buckets.empty()) throw ConfigError("fixed-size search needs a non-empty bucket grid");
    if (q.v < 1 || q.num_labels < 1) throw ConfigError("fixed-size search needs v >= 1 and num_labels >= 1");
    const std::size_t step = dim_step(q.kind);
    const std::size_t lo_dim = min_dim(q);
    std::vector<FixedSizeEntry> out;
    for (auto m : q.buckets) {
        FixedSizeEntry entry{m, std::nullopt, 0};
        if (lo_dim <= q.max_dim && model_bytes(q, m, lo_dim) <= q.budget_bytes) {
            // Largest k with model_bytes(m, k * step) <= budget; size grows with e.
            std::size_t lo = lo_dim / step, hi = q.max_dim / step;
            while (lo < hi) {
                const std::size_t mid = lo + (hi - lo + 1) / 2;
                if (model_bytes(q, m, mid * step) <= q.budget_bytes) lo = mid;
                else hi = mid - 1;
            }
            entry.e = lo * step;
            entry.bytes = model_bytes(q, m, *entry.e);
        }
        out.push_back(entry);
    }
    return out;
}

}  // namespace memcom
