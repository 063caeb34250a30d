#include "gradcheck.hpp"

#include <algorithm>
#include <random>

#include "fd_check.hpp"
#include "memcom/ops.hpp"

namespace memcom::testing {
namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void track(GradCheck& c, std::span<const double> analytic, std::span<const double> numeric) {
    c.worst = std::max(c.worst, relative_error(analytic, numeric));
}

void randomize(GradPair& p, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : p.value.data()) v = u(rng);
}

}  // namespace

GradCheck check_matmul(std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"matmul", 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t p = pick(rng, 1, 6), q = pick(rng, 1, 6), r = pick(rng, 1, 6);
        Tensor a = random_tensor({p, q}, rng), b = random_tensor({q, r}, rng);
        const Tensor up = random_tensor({p, r}, rng);
        const auto g = ops::matmul_backward(a, b, up);
        auto loss = [&] { return project(ops::matmul(a, b), up); };
        track(c, g.da.data(), numeric_gradient(a.data(), loss));
        track(c, g.db.data(), numeric_gradient(b.data(), loss));
    }
    return c;
}

GradCheck check_broadcast_mul_add(std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"broadcast_mul_add", 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t b = pick(rng, 1, 3), l = pick(rng, 1, 5), e = pick(rng, 1, 4);
        const bool rank3 = t % 2 == 0;
        const bool with_bias = pick(rng, 0, 1) == 1;
        const Shape big = rank3 ? Shape{b, l, e} : Shape{b * l, e};
        const Shape small = rank3 ? Shape{b, l, 1} : Shape{b * l, 1};
        Tensor a = random_tensor(big, rng), mult = random_tensor(small, rng), bias = random_tensor(small, rng);
        const Tensor up = random_tensor(big, rng);
        const auto g = ops::broadcast_mul_add_backward(a, mult, with_bias, up);
        auto loss = [&] { return project(ops::broadcast_mul_add(a, mult, with_bias ? &bias : nullptr), up); };
        track(c, g.da.data(), numeric_gradient(a.data(), loss));
        track(c, g.dmult.data(), numeric_gradient(mult.data(), loss));
        if (with_bias) track(c, g.dbias->data(), numeric_gradient(bias.data(), loss));
    }
    return c;
}

GradCheck check_average_pool(std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"average_pool_rows", 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t b = pick(rng, 1, 3), l = pick(rng, 1, 8), e = pick(rng, 1, 4);
        Tensor a = random_tensor({b, l, e}, rng);
        const Tensor up = random_tensor({b, 1, e}, rng);
        const Tensor da = ops::average_pool_rows_backward(up, l);
        auto loss = [&] { return project(ops::average_pool_rows(a, l), up); };
        track(c, da.data(), numeric_gradient(a.data(), loss));
    }
    return c;
}

GradCheck check_relu(std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"relu", 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        Tensor x = random_tensor({pick(rng, 1, 4), pick(rng, 1, 6)}, rng);
        // Keep inputs away from the kink so central differences stay valid.
        for (auto& v : x.data()) v = v >= 0 ? v + 0.01 : v - 0.01;
        const Tensor up = random_tensor(x.shape(), rng);
        const Tensor dx = ops::relu_backward(x, up);
        auto loss = [&] { return project(ops::relu(x), up); };
        track(c, dx.data(), numeric_gradient(x.data(), loss));
    }
    return c;
}

GradCheck check_dropout(std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"dropout", 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        Tensor x = random_tensor({pick(rng, 1, 4), pick(rng, 1, 6)}, rng);
        const double rate = std::uniform_real_distribution<double>(0.0, 0.8)(rng);
        const std::uint64_t mask_seed = rng();
        const Tensor up = random_tensor(x.shape(), rng);
        auto run = [&] {
            std::mt19937_64 r(mask_seed);
            return ops::dropout(x, rate, true, r);
        };
        const auto fwd = run();
        const Tensor dx = fwd.mask.empty() ? up : ops::dropout_backward(fwd.mask, up);
        auto loss = [&] { return project(run().out, up); };
        track(c, dx.data(), numeric_gradient(x.data(), loss));
    }
    return c;
}

GradCheck check_batchnorm(std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"batchnorm", 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t b = pick(rng, 2, 8), f = pick(rng, 1, 5);
        const bool train = t % 4 != 3;  // a quarter of the trials use running statistics
        ops::BatchNorm bn(f);
        randomize(bn.gamma, rng, 0.5, 1.5);
        randomize(bn.beta, rng);
        for (std::size_t j = 0; j < f; ++j) {
            bn.running_mean[j] = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
            bn.running_var[j] = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
        }
        Tensor x = random_tensor({b, f}, rng, -2.0, 2.0);
        const Tensor up = random_tensor({b, f}, rng);
        ops::BatchNormCache cache;
        ops::batchnorm_forward(bn, x, train, cache, false);
        bn.gamma.zero_grad();
        bn.beta.zero_grad();
        const Tensor dx = ops::batchnorm_backward(bn, cache, up);
        auto loss = [&] {
            ops::BatchNormCache scratch;
            return project(ops::batchnorm_forward(bn, x, train, scratch, false), up);
        };
        track(c, dx.data(), numeric_gradient(x.data(), loss));
        const Tensor dgamma = bn.gamma.grad, dbeta = bn.beta.grad;
        track(c, dgamma.data(), numeric_gradient(bn.gamma.value.data(), loss));
        track(c, dbeta.data(), numeric_gradient(bn.beta.value.data(), loss));
    }
    return c;
}

GradCheck check_dense(std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"dense", 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t b = pick(rng, 1, 4), in = pick(rng, 1, 6), out = pick(rng, 1, 6);
        ops::Dense layer(in, out);
        randomize(layer.weight, rng);
        randomize(layer.bias, rng);
        Tensor x = random_tensor({b, in}, rng);
        const Tensor up = random_tensor({b, out}, rng);
        layer.weight.zero_grad();
        layer.bias.zero_grad();
        const Tensor dx = ops::dense_backward(layer, x, up);
        auto loss = [&] { return project(ops::dense_forward(layer, x), up); };
        track(c, dx.data(), numeric_gradient(x.data(), loss));
        const Tensor dw = layer.weight.grad, db = layer.bias.grad;
        track(c, dw.data(), numeric_gradient(layer.weight.value.data(), loss));
        track(c, db.data(), numeric_gradient(layer.bias.value.data(), loss));
    }
    return c;
}

GradCheck check_softmax_xent(std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"softmax_cross_entropy", 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t b = pick(rng, 1, 4), n = pick(rng, 2, 7);
        Tensor logits = random_tensor({b, n}, rng, -3.0, 3.0);
        std::vector<std::int64_t> labels(b);
        for (auto& l : labels) l = static_cast<std::int64_t>(pick(rng, 0, n - 1));
        const auto sx = ops::softmax_cross_entropy(logits, labels);
        auto loss = [&] { return ops::softmax_cross_entropy(logits, labels).loss; };
        track(c, sx.dlogits.data(), numeric_gradient(logits.data(), loss));
    }
    return c;
}

std::vector<GradCheck> check_all_primitives(std::size_t trials, std::uint64_t seed) {
    return {check_matmul(trials, seed),        check_broadcast_mul_add(trials, seed + 1),
            check_average_pool(trials, seed + 2), check_relu(trials, seed + 3),
            check_dropout(trials, seed + 4),    check_batchnorm(trials, seed + 5),
            check_dense(trials, seed + 6),      check_softmax_xent(trials, seed + 7)};
}

GradCheck check_scheme(SchemeKind kind, std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheck c{"lookup/" + std::string(kind_name(kind)), 0.0, trials};
    for (std::size_t t = 0; t < trials; ++t) {
        SchemeConfig cfg;
        cfg.kind = kind;
        cfg.vocab = pick(rng, 2, 30);
        cfg.embed_dim = 2 * pick(rng, 1, 4);
        if (is_bucketed(kind)) cfg.buckets = pick(rng, 1, cfg.vocab);
        if (kind == SchemeKind::Factorized) cfg.inner_dim = pick(rng, 1, cfg.embed_dim - 1);
        if (kind == SchemeKind::TruncateRare) cfg.keep_top = pick(rng, 1, cfg.vocab);
        SchemeParams params = build_scheme(cfg, rng());
        for (auto& [name, gp] : params.registry()) randomize(*gp, rng);
        IdBatch ids(pick(rng, 1, 3), pick(rng, 1, 5));
        for (auto& id : ids.ids) id = static_cast<std::int64_t>(pick(rng, 0, cfg.vocab - 1));
        const Tensor up = random_tensor({ids.rows, ids.cols, cfg.embed_dim}, rng);
        params.zero_grad();
        lookup_backward(params, ids, up);
        auto loss = [&] { return project(lookup(params, ids), up); };
        for (auto& [name, gp] : params.registry()) {
            const Tensor analytic = gp->grad;
            track(c, analytic.data(), numeric_gradient(gp->value.data(), loss));
        }
    }
    return c;
}

namespace {

SchemeConfig toy_scheme(SchemeKind kind) {
    SchemeConfig s;
    s.kind = kind;
    s.vocab = 20;
    s.embed_dim = 8;
    if (is_bucketed(kind)) s.buckets = 7;
    if (kind == SchemeKind::Factorized) s.inner_dim = 3;
    if (kind == SchemeKind::TruncateRare) s.keep_top = 12;
    return s;
}

GradCheck check_network_params(Network& net, const std::string& name, const std::function<double()>& loss,
                               const std::function<void()>& backward) {
    GradCheck c{name, 0.0, 1};
    net.zero_grad();
    backward();
    for (auto& [pname, gp] : net.parameters()) {
        const Tensor analytic = gp->grad;
        track(c, analytic.data(), numeric_gradient(gp->value.data(), loss));
    }
    return c;
}

void randomize_network(Network& net, std::mt19937_64& rng) {
    for (auto& [name, gp] : net.parameters()) {
        if (name.ends_with(".gamma")) randomize(*gp, rng, 0.5, 1.5);
        else if (name.starts_with("embed.V") && is_memcom(net.spec().scheme.kind)) randomize(*gp, rng, 0.5, 1.5);
        else if (!name.starts_with("embed.") || name == "embed.W") randomize(*gp, rng, -0.5, 0.5);
    }
}

}  // namespace

GradCheck check_classifier(SchemeKind kind, std::uint64_t seed, Variant variant) {
    std::mt19937_64 rng(seed);
    NetworkSpec spec;
    spec.variant = variant;
    spec.scheme = toy_scheme(kind);
    spec.num_labels = 6;
    Network net(spec, seed);
    randomize_network(net, rng);
    IdBatch ids(2, spec.input_len);
    for (auto& id : ids.ids) id = static_cast<std::int64_t>(pick(rng, 0, spec.scheme.vocab - 1));
    const std::vector<std::int64_t> labels{static_cast<std::int64_t>(pick(rng, 0, 5)),
                                           static_cast<std::int64_t>(pick(rng, 0, 5))};
    const std::uint64_t drop_seed = rng();
    auto loss = [&] {
        std::mt19937_64 r(drop_seed);
        return ops::softmax_cross_entropy(net.forward(ids, true, r).logits, labels).loss;
    };
    auto backward = [&] {
        std::mt19937_64 r(drop_seed);
        auto fwd = net.forward(ids, true, r);
        net.backward(fwd.cache, ops::softmax_cross_entropy(fwd.logits, labels).dlogits);
    };
    return check_network_params(net, std::string(variant_name(variant)) + "/" + std::string(kind_name(kind)), loss,
                                backward);
}

GradCheck check_ranknet(SchemeKind kind, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    NetworkSpec spec;
    spec.variant = Variant::PairwiseRankNet;
    spec.scheme = toy_scheme(kind);
    Network net(spec, seed);
    randomize_network(net, rng);
    IdBatch users(3, spec.input_len);
    for (auto& id : users.ids) id = static_cast<std::int64_t>(pick(rng, 0, spec.scheme.vocab - 1));
    std::vector<std::int64_t> hi(3), lo(3);
    for (std::size_t i = 0; i < 3; ++i) {
        hi[i] = static_cast<std::int64_t>(pick(rng, 1, spec.scheme.vocab - 1));
        lo[i] = static_cast<std::int64_t>(pick(rng, 1, spec.scheme.vocab - 1));
    }
    const std::uint64_t drop_seed = rng();
    auto loss = [&] {
        std::mt19937_64 r(drop_seed);
        return net.pairwise_forward(users, hi, lo, true, r).loss;
    };
    auto backward = [&] {
        std::mt19937_64 r(drop_seed);
        net.pairwise_backward(net.pairwise_forward(users, hi, lo, true, r));
    };
    return check_network_params(net, "ranknet/" + std::string(kind_name(kind)), loss, backward);
}

}  // namespace memcom::testing
