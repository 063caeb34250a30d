#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "memcom/error.hpp"
#include "memcom/fixed_size.hpp"
#include "memcom/microbench.hpp"
#include "memcom/report.hpp"
#include "memcom/sweep.hpp"

using namespace memcom;

namespace {

RunReport row(std::string scheme, double ratio, std::uint64_t seed, double value) {
    RunReport r;
    r.scheme = std::move(scheme);
    r.kind_params = "m=7";
    r.m = 7;
    r.e = 16;
    r.seed = seed;
    r.total_params = 1234;
    r.embedding_params = 567;
    r.compression_ratio = ratio;
    r.metric = "accuracy";
    r.metric_value = value;
    r.relative_loss_pct = 1.25;
    r.wall_s = 0.5;
    return r;
}

SweepConfig toy_sweep() {
    SweepConfig c;
    c.data.synthetic.v_items = 150;
    c.data.synthetic.n_users = 300;
    c.data.synthetic.n_countries = 5;
    c.data.synthetic.max_len = 15;
    c.data.num_labels = 50;
    c.data.examples.popularity_floor = 2;
    c.kinds = {SchemeKind::NaiveHash, SchemeKind::MEmComNoBias};
    c.bucket_grid = {40, 10};
    c.embed_dim = 8;
    c.repeats = 2;
    c.train.epochs = 1;
    c.train.batch_size = 64;
    return c;
}

}  // namespace

TEST_CASE("report CSV round trip") {
    const std::vector<RunReport> in{row("naive_hash", 4.0, 2, 0.25), row("naive_hash", 4.0, 1, 0.125),
                                    row("memcom_nobias", 9.5, 1, 1.0 / 3.0)};
    std::stringstream s;
    emit_report(s, in);
    const auto out = parse_report(s);
    REQUIRE(out.size() == 3);
    // Sorted by scheme, then ratio, then seed.
    CHECK(out[0].scheme == "memcom_nobias");
    CHECK(out[1].seed == 1);
    CHECK(out[2].seed == 2);
    CHECK(out[1].kind_params == "m=7");
    CHECK(out[1].total_params == 1234);
    CHECK(out[1].compression_ratio == 4.0);
    CHECK(out[1].metric_value == 0.125);
    CHECK(out[0].metric_value == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(format_row(out[1]) == format_row(in[1]));
}

TEST_CASE("empty report is header only") {
    std::stringstream s;
    emit_report(s, {});
    CHECK(s.str() == std::string(kReportHeader) + "\n");
    CHECK(parse_report(s).empty());
    std::stringstream bad("scheme,wrong\n");
    CHECK_THROWS_AS(parse_report(bad), IoError);
    CHECK_THROWS_AS(emit_report(std::filesystem::path("/nonexistent/dir/out.csv"), {}), IoError);
}

TEST_CASE("baseline relative loss prints as 0.000000") {
    RunReport r = row("uncompressed", 1.0, 1, 0.5);
    r.relative_loss_pct = 0.0;
    const std::string line = format_row(r);
    CHECK(line.find(",0.000000,") != std::string::npos);
}

TEST_CASE("grid expansion") {
    CHECK(default_bucket_grid(1000) == std::vector<std::size_t>{1000, 500, 250, 100, 50, 10});
    CHECK(default_dim_grid() == std::vector<std::size_t>{128, 64, 32, 16, 8, 4});

    SweepConfig c;
    c.kinds = {SchemeKind::NaiveHash, SchemeKind::ReducedDim, SchemeKind::Factorized, SchemeKind::TruncateRare};
    c.embed_dim = 64;
    const auto g = expand_grid(c, 1000);
    CHECK(g.front().kind == SchemeKind::Uncompressed);
    // 6 buckets, dims below 64 (4), h below 64 (4), keep_top below v (5).
    CHECK(g.size() == 1 + 6 + 4 + 4 + 5);

    const std::size_t m = buckets_for_compression(SchemeKind::MEmComNoBias, 10'000, 256, 10.0);
    CHECK(m * 256 + 10'000 <= 256'000);
    CHECK((m + 1) * 256 + 10'000 > 256'000);
    CHECK_THROWS_AS(buckets_for_compression(SchemeKind::MEmComNoBias, 10'000, 4, 1000.0), ConfigError);
}

TEST_CASE("toy sweep emits one row per point and seed") {
    const SweepConfig cfg = toy_sweep();
    const SweepData data = prepare_data(cfg.data);
    const auto rows = run_sweep(cfg, data);
    CHECK(rows.size() == (1 + 2 * 2) * 2);
    const std::size_t baseline_total = rows.back().scheme == "uncompressed" ? rows.back().total_params : 0;
    CHECK(baseline_total > 0);
    for (const auto& r : rows) {
        CHECK(r.metric == "accuracy");
        CHECK(r.compression_ratio == double(baseline_total) / double(r.total_params));
        if (r.scheme == "uncompressed") {
            CHECK(r.compression_ratio == 1.0);
            CHECK(r.relative_loss_pct == 0.0);
        }
    }
    const auto summary = summarize(rows);
    CHECK(summary.size() == 5);
    for (const auto& s : summary) CHECK(s.runs == 2);
}

TEST_CASE("failed points become error rows") {
    SweepConfig cfg = toy_sweep();
    cfg.kinds = {SchemeKind::DoubleHash};
    cfg.embed_dim = 7;  // double hashing needs an even width
    cfg.repeats = 1;
    cfg.bucket_grid = {10};
    const auto rows = run_sweep(cfg, prepare_data(cfg.data));
    REQUIRE(rows.size() == 2);
    const auto& err = rows[0].scheme == "double_hash" ? rows[0] : rows[1];
    CHECK(err.metric == "error");
    CHECK(std::isnan(err.metric_value));
    CHECK(err.kind_params.find(";error=") != std::string::npos);
    CHECK(summarize(rows).front().errors + summarize(rows).back().errors == 1);
}

TEST_CASE("report row carries the scheme's embedding count") {
    // v = 10,000 (padding, one country, 9,998 items), e = 256, m = 1,000, 5,000 labels.
    Dataset records;
    for (std::size_t u = 0; u < 20; ++u) {
        UserRecord r{"u" + std::to_string(u), "c0", {}};
        for (std::size_t k = 0; k < 3; ++k) r.items.push_back("i" + std::to_string((u * 3 + k) % 9998));
        records.push_back(r);
    }
    // Each item appears for two adjacent users, so holding out every tenth user keeps it in training.
    for (std::size_t i = 0; i < 9998; ++i) {
        for (int copy = 0; copy < 2; ++copy) records.push_back({"f" + std::to_string(2 * i + copy), "c0", {"i" + std::to_string(i)}});
    }
    SweepConfig cfg;
    cfg.data.num_labels = 5000;
    cfg.data.examples.popularity_floor = 0;
    cfg.kinds = {SchemeKind::MEmComNoBias};
    cfg.bucket_grid = {1000};
    cfg.repeats = 1;
    cfg.train.epochs = 1;
    const SweepData data = prepare_data(cfg.data, records);
    REQUIRE(data.v() == 10'000);
    const auto rows = run_sweep(cfg, data);
    REQUIRE(rows.size() == 2);
    const auto& mem = rows[0].scheme == "memcom_nobias" ? rows[0] : rows[1];
    CHECK(mem.embedding_params == 266'000);
}

TEST_CASE("fixed-size search") {
    FixedSizeQuery q;
    q.kind = SchemeKind::MEmComNoBias;
    q.v = 5000;
    q.num_labels = 100;
    q.buckets = {5000, 1000, 100};
    q.budget_bytes = model_bytes(q, 1000, 48);
    const auto r = fixed_size_search(q);
    CHECK(*r[1].e == 48);
    for (const auto& e : r) {
        REQUIRE(e.e.has_value());
        CHECK(e.bytes == model_bytes(q, e.m, *e.e));
        CHECK(e.bytes <= q.budget_bytes);
        CHECK(model_bytes(q, e.m, *e.e + 1) > q.budget_bytes);
    }
    for (std::size_t budget = 100'000; budget <= 20'000'000; budget *= 2) {
        q.budget_bytes = budget;
        const auto a = fixed_size_search(q);
        q.budget_bytes = 2 * budget;
        const auto b = fixed_size_search(q);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].e) CHECK(*b[i].e >= *a[i].e);
        }
    }
    q.budget_bytes = 10;
    CHECK_FALSE(fixed_size_search(q).front().e.has_value());
    q.kind = SchemeKind::Factorized;
    CHECK_THROWS_AS(fixed_size_search(q), ConfigError);
}

TEST_CASE("microbench paths") {
    std::vector<std::int64_t> ids;
    for (std::int64_t i = 0; i < 64; ++i) ids.push_back((i * 7919) % 1000);
    const auto p = embedding_paths_f64(1000, 32, 1000, ids, 3);
    CHECK(p.table == p.onehot);

    MicrobenchConfig c;
    c.v = 2000;
    c.m = 2000;
    c.e = 16;
    c.iterations = 5;
    c.warmup = 1;
    const auto r = microbench_lookup_vs_onehot(c);
    CHECK(r.table_predicted_values == 17);
    CHECK(r.onehot_predicted_values == 2016);
    CHECK(r.table_peak_bytes < r.onehot_peak_bytes);
    CHECK(r.table_ns_per_inference > 0.0);

    MicrobenchConfig full_scale;
    full_scale.v = 100'000;
    full_scale.e = 128;
    full_scale.m = 100'000;
    full_scale.iterations = 3;
    full_scale.warmup = 0;
    const auto pr = microbench_lookup_vs_onehot(full_scale);
    CHECK(pr.table_predicted_values == 129);
    CHECK(pr.onehot_predicted_values == 100'128);

    c.m = 3000;
    CHECK_THROWS_AS(microbench_lookup_vs_onehot(c), ConfigError);
}
