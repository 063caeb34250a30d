#include "memcom/scheme.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "memcom/checkpoint.hpp"
#include "memcom/error.hpp"
#include "memcom/kernels.hpp"
#include "memcom/ops.hpp"

namespace memcom {

namespace {

struct KindName {
    SchemeKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {
    {SchemeKind::Uncompressed, "uncompressed"}, {SchemeKind::ReducedDim, "reduced_dim"},
    {SchemeKind::TruncateRare, "truncate_rare"}, {SchemeKind::NaiveHash, "naive_hash"},
    {SchemeKind::DoubleHash, "double_hash"},     {SchemeKind::QRConcat, "qr_concat"},
    {SchemeKind::QRMult, "qr_mult"},             {SchemeKind::Factorized, "factorized"},
    {SchemeKind::MEmComNoBias, "memcom_nobias"}, {SchemeKind::MEmComBias, "memcom_bias"},
};

}  // namespace

std::string_view kind_name(SchemeKind kind) {
    for (const auto& k : kKindNames) {
        if (k.kind == kind) return k.name;
    }
    return "unknown";
}

SchemeKind parse_kind(std::string_view name) {
    for (const auto& k : kKindNames) {
        if (k.name == name) return k.kind;
    }
    throw ConfigError("unknown scheme kind '" + std::string(name) + "'");
}

bool is_bucketed(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::NaiveHash:
        case SchemeKind::DoubleHash:
        case SchemeKind::QRConcat:
        case SchemeKind::QRMult:
        case SchemeKind::MEmComNoBias:
        case SchemeKind::MEmComBias: return true;
        default: return false;
    }
}

bool is_memcom(SchemeKind kind) { return kind == SchemeKind::MEmComNoBias || kind == SchemeKind::MEmComBias; }

void SchemeConfig::validate() const {
    const std::string who = std::string(kind_name(kind)) + ": ";
    if (vocab < 1) throw ConfigError(who + "vocab size must be >= 1");
    if (embed_dim < 1) throw ConfigError(who + "embedding size must be >= 1");
    if (is_bucketed(kind) && (buckets < 1 || buckets > vocab)) {
        throw ConfigError(who + "bucket count must satisfy 1 <= m <= v (m=" + std::to_string(buckets) +
                          ", v=" + std::to_string(vocab) + ")");
    }
    if (kind == SchemeKind::Factorized && (inner_dim < 1 || inner_dim >= embed_dim)) {
        throw ConfigError(who + "inner dimension must satisfy 1 <= h < e (h=" + std::to_string(inner_dim) + ")");
    }
    if (kind == SchemeKind::TruncateRare && (keep_top < 1 || keep_top > vocab)) {
        throw ConfigError(who + "keep_top must satisfy 1 <= keep_top <= v");
    }
    if ((kind == SchemeKind::DoubleHash || kind == SchemeKind::QRConcat) && embed_dim % 2 != 0) {
        throw ConfigError(who + "embedding size must be even (two half-width tables)");
    }
    if (kind == SchemeKind::DoubleHash && hash2.p < 2) throw ConfigError(who + "hash modulus p must be >= 2");
}

std::size_t SchemeConfig::quotient_rows() const { return buckets == 0 ? 0 : (vocab + buckets - 1) / buckets; }

KeyValues SchemeConfig::to_key_values(const std::string& prefix) const {
    KeyValues kv;
    kv[prefix + "kind"] = std::string(kind_name(kind));
    kv[prefix + "vocab"] = std::to_string(vocab);
    kv[prefix + "embed_dim"] = std::to_string(embed_dim);
    kv[prefix + "buckets"] = std::to_string(buckets);
    kv[prefix + "inner_dim"] = std::to_string(inner_dim);
    kv[prefix + "keep_top"] = std::to_string(keep_top);
    kv[prefix + "hash2_a"] = std::to_string(hash2.a);
    kv[prefix + "hash2_b"] = std::to_string(hash2.b);
    kv[prefix + "hash2_p"] = std::to_string(hash2.p);
    kv[prefix + "seed"] = std::to_string(seed);
    return kv;
}

SchemeConfig SchemeConfig::from_key_values(const KeyValues& kv, const std::string& prefix) {
    SchemeConfig c;
    c.kind = parse_kind(kv_require(kv, prefix + "kind"));
    c.vocab = kv_uint(kv, prefix + "vocab", 0);
    c.embed_dim = kv_uint(kv, prefix + "embed_dim", 0);
    c.buckets = kv_uint(kv, prefix + "buckets", 0);
    c.inner_dim = kv_uint(kv, prefix + "inner_dim", 0);
    c.keep_top = kv_uint(kv, prefix + "keep_top", 0);
    c.hash2.a = kv_uint(kv, prefix + "hash2_a", c.hash2.a);
    c.hash2.b = kv_uint(kv, prefix + "hash2_b", c.hash2.b);
    c.hash2.p = kv_uint(kv, prefix + "hash2_p", c.hash2.p);
    c.seed = kv_uint(kv, prefix + "seed", 0);
    return c;
}

ParamCount count_params(const SchemeConfig& c) {
    c.validate();
    const std::size_t v = c.vocab, e = c.embed_dim, m = c.buckets, h = c.inner_dim;
    switch (c.kind) {
        case SchemeKind::Uncompressed: return {v * e, "v*e"};
        case SchemeKind::ReducedDim: return {v * e, "v*e (reduced e)"};
        case SchemeKind::TruncateRare: return {(c.keep_top + 1) * e, "(keep_top+1)*e"};
        case SchemeKind::NaiveHash: return {m * e, "m*e"};
        case SchemeKind::DoubleHash: return {2 * m * (e / 2), "2*m*(e/2)"};
        case SchemeKind::QRConcat: return {(m + c.quotient_rows()) * (e / 2), "(m+ceil(v/m))*(e/2)"};
        case SchemeKind::QRMult: return {(m + c.quotient_rows()) * e, "(m+ceil(v/m))*e"};
        case SchemeKind::Factorized: return {v * h + h * e, "v*h+h*e"};
        case SchemeKind::MEmComNoBias: return {m * e + v, "m*e+v"};
        case SchemeKind::MEmComBias: return {m * e + 2 * v, "m*e+2v"};
    }
    throw ConfigError("unknown scheme kind");
}

std::vector<std::pair<std::string, GradPair*>> SchemeParams::registry() {
    std::vector<std::pair<std::string, GradPair*>> r{{"U", &U}};
    if (V) r.emplace_back("V", &*V);
    if (W) r.emplace_back("W", &*W);
    if (P) r.emplace_back("P", &*P);
    return r;
}

std::vector<std::pair<std::string, const GradPair*>> SchemeParams::registry() const {
    std::vector<std::pair<std::string, const GradPair*>> r{{"U", &U}};
    if (V) r.emplace_back("V", &*V);
    if (W) r.emplace_back("W", &*W);
    if (P) r.emplace_back("P", &*P);
    return r;
}

std::size_t SchemeParams::allocated_params() const {
    std::size_t n = 0;
    for (const auto& [name, gp] : registry()) n += gp->value.size();
    return n;
}

void SchemeParams::zero_grad() {
    for (auto& [name, gp] : registry()) gp->zero_grad();
}

namespace {

Tensor uniform_table(std::size_t rows, std::size_t cols, double limit, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor t({rows, cols}, 0.0);
    for (auto& x : t.data()) x = u(rng);
    return t;
}

}  // namespace

SchemeParams build_scheme(const SchemeConfig& c, std::uint64_t rng_seed) {
    c.validate();
    std::mt19937_64 rng(rng_seed);
    const std::size_t v = c.vocab, e = c.embed_dim, m = c.buckets;
    const double limit = 1.0 / std::sqrt(static_cast<double>(e));
    SchemeParams p;
    p.config = c;
    switch (c.kind) {
        case SchemeKind::Uncompressed:
        case SchemeKind::ReducedDim: p.U = GradPair(uniform_table(v, e, limit, rng)); break;
        case SchemeKind::TruncateRare: p.U = GradPair(uniform_table(c.keep_top + 1, e, limit, rng)); break;
        case SchemeKind::NaiveHash: p.U = GradPair(uniform_table(m, e, limit, rng)); break;
        case SchemeKind::DoubleHash:
            p.U = GradPair(uniform_table(m, e / 2, limit, rng));
            p.V = GradPair(uniform_table(m, e / 2, limit, rng));
            break;
        case SchemeKind::QRConcat:
            p.U = GradPair(uniform_table(m, e / 2, limit, rng));
            p.V = GradPair(uniform_table(c.quotient_rows(), e / 2, limit, rng));
            break;
        case SchemeKind::QRMult:
            p.U = GradPair(uniform_table(m, e, limit, rng));
            p.V = GradPair(uniform_table(c.quotient_rows(), e, limit, rng));
            break;
        case SchemeKind::Factorized:
            p.U = GradPair(uniform_table(v, c.inner_dim, limit, rng));
            p.P = GradPair(uniform_table(c.inner_dim, e, 1.0 / std::sqrt(static_cast<double>(c.inner_dim)), rng));
            break;
        case SchemeKind::MEmComNoBias:
        case SchemeKind::MEmComBias:
            p.U = GradPair(uniform_table(m, e, limit, rng));
            p.V = GradPair(Tensor({v, 1}, 1.0));
            if (c.kind == SchemeKind::MEmComBias) p.W = GradPair(Tensor({v, 1}, 0.0));
            break;
    }
    return p;
}

std::size_t second_hash(const SchemeConfig& c, std::int64_t id) {
    const auto i = static_cast<std::uint64_t>(id);
    // a < 2^32 and i < 2^32 keep a*i + b inside 64 bits.
    return static_cast<std::size_t>(((c.hash2.a * i + c.hash2.b) % c.hash2.p) % c.buckets);
}

namespace {

void check_ids(const SchemeConfig& c, const IdBatch& ids) {
    for (auto id : ids.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= c.vocab) {
            throw IndexError("id outside vocabulary [0, " + std::to_string(c.vocab) + ")", id);
        }
    }
}

// Row of U read for each id (primary table index).
std::vector<std::int64_t> primary_rows(const SchemeConfig& c, const IdBatch& ids) {
    std::vector<std::int64_t> rows(ids.size());
    const auto m = static_cast<std::int64_t>(c.buckets);
    const auto keep = static_cast<std::int64_t>(c.keep_top);
    for (std::size_t n = 0; n < ids.size(); ++n) {
        const auto i = ids.ids[n];
        switch (c.kind) {
            case SchemeKind::TruncateRare: rows[n] = i < keep ? i : keep; break;
            case SchemeKind::NaiveHash:
            case SchemeKind::DoubleHash:
            case SchemeKind::QRConcat:
            case SchemeKind::QRMult:
            case SchemeKind::MEmComNoBias:
            case SchemeKind::MEmComBias: rows[n] = i % m; break;
            default: rows[n] = i;
        }
    }
    return rows;
}

// Row of V read for each id (quotient, second hash, or multiplier index).
std::vector<std::int64_t> secondary_rows(const SchemeConfig& c, const IdBatch& ids) {
    std::vector<std::int64_t> rows(ids.size());
    const auto m = static_cast<std::int64_t>(c.buckets);
    for (std::size_t n = 0; n < ids.size(); ++n) {
        const auto i = ids.ids[n];
        switch (c.kind) {
            case SchemeKind::DoubleHash: rows[n] = static_cast<std::int64_t>(second_hash(c, i)); break;
            case SchemeKind::QRConcat:
            case SchemeKind::QRMult: rows[n] = i / m; break;
            default: rows[n] = i;
        }
    }
    return rows;
}

Tensor gather(const Tensor& table, const std::vector<std::int64_t>& rows, Shape shape) {
    Tensor out(std::move(shape), 0.0);
    kernels::active<double>().gather_rows(table.raw(), table.dim(1), rows.data(), rows.size(), out.raw());
    return out;
}

}  // namespace

Tensor lookup(const SchemeParams& p, const IdBatch& ids) {
    const auto& c = p.config;
    check_ids(c, ids);
    const std::size_t b = ids.rows, l = ids.cols, e = c.embed_dim, n = ids.size();
    const auto& k = kernels::active<double>();
    const auto rows = primary_rows(c, ids);
    switch (c.kind) {
        case SchemeKind::Uncompressed:
        case SchemeKind::ReducedDim:
        case SchemeKind::TruncateRare:
        case SchemeKind::NaiveHash: return gather(p.U.value, rows, {b, l, e});
        case SchemeKind::DoubleHash:
        case SchemeKind::QRConcat: {
            const auto rows2 = secondary_rows(c, ids);
            const std::size_t half = e / 2;
            Tensor out({b, l, e}, 0.0);
            for (std::size_t t = 0; t < n; ++t) {
                k.gather_rows(p.U.value.raw(), half, &rows[t], 1, out.raw() + t * e);
                k.gather_rows(p.V->value.raw(), half, &rows2[t], 1, out.raw() + t * e + half);
            }
            return out;
        }
        case SchemeKind::QRMult: {
            const auto rows2 = secondary_rows(c, ids);
            Tensor out({b, l, e}, 0.0);
            for (std::size_t t = 0; t < n; ++t) {
                k.mul(p.U.value.raw() + rows[t] * e, p.V->value.raw() + rows2[t] * e, out.raw() + t * e, e);
            }
            return out;
        }
        case SchemeKind::Factorized: {
            const std::size_t h = c.inner_dim;
            Tensor inner = gather(p.U.value, rows, {n, h});
            return ops::matmul(inner, p.P->value).reshaped({b, l, e});
        }
        case SchemeKind::MEmComNoBias:
        case SchemeKind::MEmComBias: {
            const Tensor rem = gather(p.U.value, rows, {b, l, e});
            const Tensor mult = gather(p.V->value, ids.ids, {b, l, 1});
            if (c.kind == SchemeKind::MEmComNoBias) return ops::broadcast_mul_add(rem, mult, nullptr);
            const Tensor bias = gather(p.W->value, ids.ids, {b, l, 1});
            return ops::broadcast_mul_add(rem, mult, &bias);
        }
    }
    throw ConfigError("unknown scheme kind");
}

void lookup_backward(SchemeParams& p, const IdBatch& ids, const Tensor& dout) {
    const auto& c = p.config;
    check_ids(c, ids);
    const std::size_t b = ids.rows, l = ids.cols, e = c.embed_dim, n = ids.size();
    if (dout.shape() != Shape{b, l, e}) {
        throw DimensionError("lookup gradient has shape " + shape_string(dout.shape()) + ", expected " +
                             shape_string({b, l, e}));
    }
    const auto& k = kernels::active<double>();
    const auto rows = primary_rows(c, ids);
    double* dU = p.U.grad.raw();
    switch (c.kind) {
        case SchemeKind::Uncompressed:
        case SchemeKind::ReducedDim:
        case SchemeKind::TruncateRare:
        case SchemeKind::NaiveHash:
            for (std::size_t t = 0; t < n; ++t) k.add(dout.raw() + t * e, dU + rows[t] * e, e);
            return;
        case SchemeKind::DoubleHash:
        case SchemeKind::QRConcat: {
            const auto rows2 = secondary_rows(c, ids);
            const std::size_t half = e / 2;
            for (std::size_t t = 0; t < n; ++t) {
                k.add(dout.raw() + t * e, dU + rows[t] * half, half);
                k.add(dout.raw() + t * e + half, p.V->grad.raw() + rows2[t] * half, half);
            }
            return;
        }
        case SchemeKind::QRMult: {
            const auto rows2 = secondary_rows(c, ids);
            std::vector<double> tmp(e);
            for (std::size_t t = 0; t < n; ++t) {
                const double* g = dout.raw() + t * e;
                k.mul(g, p.V->value.raw() + rows2[t] * e, tmp.data(), e);
                k.add(tmp.data(), dU + rows[t] * e, e);
                k.mul(g, p.U.value.raw() + rows[t] * e, tmp.data(), e);
                k.add(tmp.data(), p.V->grad.raw() + rows2[t] * e, e);
            }
            return;
        }
        case SchemeKind::Factorized: {
            const std::size_t h = c.inner_dim;
            const Tensor inner = gather(p.U.value, rows, {n, h});
            const auto g = ops::matmul_backward(inner, p.P->value, dout.reshaped({n, e}));
            k.add(g.db.raw(), p.P->grad.raw(), g.db.size());
            for (std::size_t t = 0; t < n; ++t) k.add(g.da.raw() + t * h, dU + rows[t] * h, h);
            return;
        }
        case SchemeKind::MEmComNoBias:
        case SchemeKind::MEmComBias: {
            const bool has_bias = c.kind == SchemeKind::MEmComBias;
            const Tensor rem = gather(p.U.value, rows, {b, l, e});
            const Tensor mult = gather(p.V->value, ids.ids, {b, l, 1});
            const auto g = ops::broadcast_mul_add_backward(rem, mult, has_bias, dout);
            for (std::size_t t = 0; t < n; ++t) {
                k.add(g.da.raw() + t * e, dU + rows[t] * e, e);
                p.V->grad[static_cast<std::size_t>(ids.ids[t])] += g.dmult[t];
                if (has_bias) p.W->grad[static_cast<std::size_t>(ids.ids[t])] += (*g.dbias)[t];
            }
            return;
        }
    }
}

void save_scheme(std::ostream& out, const SchemeParams& params) {
    std::vector<std::pair<std::string, const Tensor*>> blocks;
    for (const auto& [name, gp] : params.registry()) blocks.emplace_back(name, &gp->value);
    write_checkpoint(out, params.config.to_key_values(), blocks);
}

void save_scheme(const std::filesystem::path& path, const SchemeParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    save_scheme(out, params);
}

SchemeParams load_scheme(std::istream& in) {
    const auto ck = read_checkpoint(in);
    const auto config = SchemeConfig::from_key_values(ck.header);
    // Allocate the expected shapes, then overwrite with stored values.
    SchemeParams p = build_scheme(config, 0);
    for (auto& [name, gp] : p.registry()) {
        const Tensor& stored = ck.get(name);
        if (stored.shape() != gp->value.shape()) {
            throw IoError("tensor '" + name + "' has shape " + shape_string(stored.shape()) + ", expected " +
                          shape_string(gp->value.shape()));
        }
        *gp = GradPair(stored);
    }
    return p;
}

SchemeParams load_scheme(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return load_scheme(in);
}

}  // namespace memcom
