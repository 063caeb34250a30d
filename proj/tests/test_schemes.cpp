#include <doctest.h>

#include <random>
#include <sstream>

#include "memcom/error.hpp"
#include "memcom/scheme.hpp"

using namespace memcom;

namespace {

SchemeConfig make(SchemeKind kind, std::size_t v, std::size_t e, std::size_t m = 0) {
    SchemeConfig c;
    c.kind = kind;
    c.vocab = v;
    c.embed_dim = e;
    c.buckets = m;
    if (kind == SchemeKind::Factorized) c.inner_dim = e / 2;
    if (kind == SchemeKind::TruncateRare) c.keep_top = m ? m : v / 2;
    return c;
}

IdBatch random_ids(std::size_t b, std::size_t l, std::size_t v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    IdBatch ids(b, l);
    for (auto& id : ids.ids) id = static_cast<std::int64_t>(rng() % v);
    return ids;
}

std::size_t registry_count(const SchemeParams& p) {
    std::size_t n = 0;
    for (const auto& [name, gp] : p.registry()) n += gp->value.size();
    return n;
}

}  // namespace

TEST_CASE("kind names round trip") {
    for (SchemeKind k : kAllSchemeKinds) CHECK(parse_kind(kind_name(k)) == k);
    CHECK_THROWS_AS(parse_kind("bogus"), ConfigError);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(make(SchemeKind::NaiveHash, 10, 4, 11).validate(), ConfigError);
    CHECK_THROWS_AS(make(SchemeKind::NaiveHash, 10, 4, 0).validate(), ConfigError);
    CHECK_THROWS_AS(make(SchemeKind::QRConcat, 10, 3, 4).validate(), ConfigError);
    auto f = make(SchemeKind::Factorized, 10, 4);
    f.inner_dim = 4;
    CHECK_THROWS_AS(f.validate(), ConfigError);
    CHECK_THROWS_AS(build_scheme(make(SchemeKind::Uncompressed, 0, 4), 1), ConfigError);
}

TEST_CASE("initial table shapes") {
    const auto mem = build_scheme(make(SchemeKind::MEmComNoBias, 10, 3, 4), 1);
    CHECK(mem.U.value.shape() == Shape{4, 3});
    CHECK(mem.V->value.shape() == Shape{10, 1});
    for (double x : mem.V->value.data()) CHECK(x == 1.0);

    const auto qr = build_scheme(make(SchemeKind::QRConcat, 10, 8, 4), 1);
    CHECK(qr.U.value.shape() == Shape{4, 4});
    CHECK(qr.V->value.shape() == Shape{3, 4});

    const auto bias = build_scheme(make(SchemeKind::MEmComBias, 10, 4, 10), 1);
    for (double x : bias.W->value.data()) CHECK(x == 0.0);

    const auto u = build_scheme(make(SchemeKind::Uncompressed, 50, 16), 2);
    const double limit = 1.0 / 4.0;
    for (double x : u.U.value.data()) CHECK((x >= -limit && x <= limit));
}

TEST_CASE("same seed gives identical tables") {
    for (SchemeKind k : kAllSchemeKinds) {
        const auto c = make(k, 40, 8, 7);
        const auto a = build_scheme(c, 99), b = build_scheme(c, 99);
        const auto ra = a.registry(), rb = b.registry();
        REQUIRE(ra.size() == rb.size());
        for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].second->value == rb[i].second->value);
    }
}

TEST_CASE("parameter counts follow the closed forms and the registry") {
    CHECK(count_params(make(SchemeKind::Uncompressed, 100'000, 128)).embedding_params == 12'800'000);
    CHECK(count_params(make(SchemeKind::MEmComNoBias, 10'000, 256, 1'000)).embedding_params == 266'000);
    CHECK(count_params(make(SchemeKind::MEmComBias, 10, 4, 10)).embedding_params == 60);

    const std::size_t v = 97, e = 8, m = 13, q = (v + m - 1) / m;
    CHECK(count_params(make(SchemeKind::NaiveHash, v, e, m)).embedding_params == m * e);
    CHECK(count_params(make(SchemeKind::DoubleHash, v, e, m)).embedding_params == 2 * m * (e / 2));
    CHECK(count_params(make(SchemeKind::QRConcat, v, e, m)).embedding_params == (m + q) * (e / 2));
    CHECK(count_params(make(SchemeKind::QRMult, v, e, m)).embedding_params == (m + q) * e);
    CHECK(count_params(make(SchemeKind::Factorized, v, e)).embedding_params == v * (e / 2) + (e / 2) * e);
    CHECK(count_params(make(SchemeKind::MEmComNoBias, v, e, m)).embedding_params == m * e + v);
    CHECK(count_params(make(SchemeKind::MEmComBias, v, e, m)).embedding_params == m * e + 2 * v);
    CHECK(count_params(make(SchemeKind::TruncateRare, v, e, m)).embedding_params == (m + 1) * e);

    for (SchemeKind k : kAllSchemeKinds) {
        for (std::size_t mm : {1, 5, 13, 97}) {
            const auto c = make(k, v, e, mm);
            const auto p = build_scheme(c, 1);
            CHECK(registry_count(p) == count_params(c).embedding_params);
            CHECK(p.allocated_params() == count_params(c).embedding_params);
        }
    }
}

TEST_CASE("lookup index arithmetic") {
    auto cfg = make(SchemeKind::QRMult, 10, 4, 3);
    auto p = build_scheme(cfg, 5);
    const Tensor out = lookup(p, IdBatch(1, 1, std::vector<std::int64_t>{7}));
    for (std::size_t k = 0; k < 4; ++k) CHECK(out[k] == p.U.value.at(1, k) * p.V->value.at(2, k));

    auto dh = build_scheme(make(SchemeKind::DoubleHash, 50, 6, 7), 5);
    const std::int64_t id = 33;
    const Tensor d = lookup(dh, IdBatch(1, 1, std::vector<std::int64_t>{id}));
    const std::size_t j2 = ((2654435761ULL * 33 + 1013904223ULL) % 2147483647ULL) % 7;
    CHECK(second_hash(dh.config, id) == j2);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(d[k] == dh.U.value.at(33 % 7, k));
        CHECK(d[3 + k] == dh.V->value.at(j2, k));
    }

    auto tr = build_scheme(make(SchemeKind::TruncateRare, 20, 4, 5), 5);
    const Tensor t = lookup(tr, IdBatch(1, 2, std::vector<std::int64_t>{12, 19}));
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(t[k] == tr.U.value.at(5, k));
        CHECK(t[4 + k] == tr.U.value.at(5, k));
    }

    CHECK_THROWS_AS(lookup(p, IdBatch(1, 1, std::vector<std::int64_t>{10})), IndexError);
    try {
        lookup(p, IdBatch(1, 1, std::vector<std::int64_t>{-3}));
        FAIL("expected an index error");
    } catch (const IndexError& e) {
        CHECK(e.offending() == -3);
    }
}

TEST_CASE("output shape is b x l x e for every kind") {
    for (SchemeKind k : kAllSchemeKinds) {
        const auto p = build_scheme(make(k, 30, 6, 4), 1);
        CHECK(lookup(p, random_ids(3, 5, 30, 1)).shape() == Shape{3, 5, 6});
    }
}

TEST_CASE("MEmCom at initialization equals naive hashing bit for bit") {
    for (SchemeKind mk : {SchemeKind::MEmComNoBias, SchemeKind::MEmComBias}) {
        for (std::size_t m : {1, 7, 100, 1000}) {
            const auto memcom = build_scheme(make(mk, 1000, 16, m), 3);
            auto naive = build_scheme(make(SchemeKind::NaiveHash, 1000, 16, m), 4);
            naive.U = memcom.U;
            for (std::uint64_t s = 0; s < 5; ++s) {
                const IdBatch ids = random_ids(8, 128, 1000, s);
                CHECK(lookup(memcom, ids) == lookup(naive, ids));
            }
        }
    }
}

TEST_CASE("ids absent from a batch get exactly zero gradient") {
    for (SchemeKind k : kAllSchemeKinds) {
        const std::size_t v = 60, m = 60;  // m = v so no row is shared between ids
        auto cfg = make(k, v, 4, m);
        if (k == SchemeKind::TruncateRare) cfg.keep_top = v;
        auto p = build_scheme(cfg, 1);
        const IdBatch ids(1, 3, std::vector<std::int64_t>{2, 5, 5});
        p.zero_grad();
        lookup_backward(p, ids, Tensor({1, 3, 4}, 1.0));
        auto touched_row = [&](const std::string& name, std::size_t row) {
            if (name == "P") return true;
            if (k == SchemeKind::QRConcat || k == SchemeKind::QRMult) {
                if (name == "V") return row == 0;  // 2/60 and 5/60
            }
            if (k == SchemeKind::DoubleHash && name == "V") {
                return row == second_hash(cfg, 2) || row == second_hash(cfg, 5);
            }
            return row == 2 || row == 5;
        };
        for (auto& [name, gp] : p.registry()) {
            const std::size_t rows = gp->grad.dim(0), cols = gp->grad.size() / rows;
            for (std::size_t r = 0; r < rows; ++r) {
                if (touched_row(name, r)) continue;
                for (std::size_t c = 0; c < cols; ++c) CHECK(gp->grad[r * cols + c] == 0.0);
            }
        }
    }
}

TEST_CASE("scheme save and load") {
    for (SchemeKind k : kAllSchemeKinds) {
        const auto p = build_scheme(make(k, 30, 6, 4), 8);
        std::stringstream s;
        save_scheme(s, p);
        const auto q = load_scheme(s);
        CHECK(q.config == p.config);
        const IdBatch ids = random_ids(2, 9, 30, 1);
        CHECK(lookup(q, ids) == lookup(p, ids));
    }
}
