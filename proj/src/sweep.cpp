#include "memcom/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "memcom/error.hpp"
#include "memcom/metrics.hpp"

namespace memcom {
namespace {

std::string kind_params(const SchemeConfig& s) {
    switch (s.kind) {
        case SchemeKind::Uncompressed:
        case SchemeKind::ReducedDim:
            return "e=" + std::to_string(s.embed_dim);
        case SchemeKind::TruncateRare:
            return "keep_top=" + std::to_string(s.keep_top);
        case SchemeKind::Factorized:
            return "h=" + std::to_string(s.inner_dim);
        case SchemeKind::DoubleHash:
            return "m=" + std::to_string(s.buckets) + ";a=" + std::to_string(s.hash2.a) + ";b=" +
                   std::to_string(s.hash2.b) + ";p=" + std::to_string(s.hash2.p);
        default:
            return "m=" + std::to_string(s.buckets);
    }
}

SchemeConfig make_config(SchemeKind kind, std::size_t v, std::size_t e, std::size_t m = 0, std::size_t h = 0,
                         std::size_t keep_top = 0) {
    SchemeConfig c;
    c.kind = kind;
    c.vocab = v;
    c.embed_dim = e;
    c.buckets = m;
    c.inner_dim = h;
    c.keep_top = keep_top;
    return c;
}

struct Task {
    SchemeConfig scheme;
    std::uint64_t seed;
};

template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

std::string_view metric_name(SweepMetric m) { return m == SweepMetric::Accuracy ? "accuracy" : "ndcg"; }

SweepMetric parse_metric(std::string_view name) {
    if (name == "accuracy") return SweepMetric::Accuracy;
    if (name == "ndcg") return SweepMetric::Ndcg;
    throw ConfigError("unknown metric '" + std::string(name) + "' (expected accuracy or ndcg)");
}

SweepData prepare_data(const DataSpec& spec, const Dataset& records, bool pairwise) {
    if (spec.eval_every < 2) throw ConfigError("eval_every must be >= 2");
    Dataset train_users, eval_users;
    for (std::size_t i = 0; i < records.size(); ++i) {
        (i % spec.eval_every == 0 ? eval_users : train_users).push_back(records[i]);
    }
    SweepData d;
    d.vocab = build_vocab(train_users, spec.max_items);
    d.num_labels = spec.num_labels > 0 ? std::min(spec.num_labels, d.vocab.n_items()) : d.vocab.n_items();
    ExampleOptions opt = spec.examples;
    opt.num_labels = d.num_labels;
    d.train = make_ranking_examples(d.vocab, train_users, opt, &d.train_stats);
    d.eval = make_ranking_examples(d.vocab, eval_users, opt, &d.eval_stats);
    if (d.train.size() == 0 || d.eval.size() == 0) throw ConfigError("data split left no training or evaluation examples");
    if (pairwise) d.pairs = make_pairwise_examples(d.vocab, d.train, d.num_labels, spec.synthetic.seed + 17);
    return d;
}

SweepData prepare_data(const DataSpec& spec, bool pairwise) {
    const Dataset records = spec.dataset_path.empty() ? generate_synthetic(spec.synthetic) : read_dataset(spec.dataset_path);
    return prepare_data(spec, records, pairwise);
}

void SweepConfig::validate() const {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (embed_dim < 2) throw ConfigError("embedding size must be >= 2");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    for (double r : compression_grid) {
        if (!(r >= 1.0)) throw ConfigError("compression targets must be >= 1");
    }
    for (auto m : bucket_grid) {
        if (m < 1) throw ConfigError("bucket grid entries must be >= 1");
    }
    for (auto d : dim_grid) {
        if (d < 1) throw ConfigError("dimension grid entries must be >= 1");
    }
    train.validate();
}

std::vector<std::size_t> default_bucket_grid(std::size_t v) {
    std::vector<std::size_t> g;
    for (std::size_t div : {1, 2, 4, 10, 20, 100}) g.push_back(std::max<std::size_t>(1, v / div));
    return g;
}

std::vector<std::size_t> default_dim_grid() { return {128, 64, 32, 16, 8, 4}; }

std::size_t buckets_for_compression(SchemeKind kind, std::size_t v, std::size_t e, double ratio) {
    if (!is_bucketed(kind)) throw ConfigError(std::string(kind_name(kind)) + " has no bucket count");
    if (!(ratio >= 1.0)) throw ConfigError("compression target must be >= 1");
    const double target = double(v) * double(e) / ratio;
    SchemeConfig c = make_config(kind, v, e);
    for (std::size_t m = v; m >= 1; --m) {
        c.buckets = m;
        if (double(count_params(c).embedding_params) <= target) return m;
    }
    throw ConfigError(std::string(kind_name(kind)) + " cannot reach " + std::to_string(ratio) +
                      "x embedding compression at v=" + std::to_string(v) + ", e=" + std::to_string(e));
}

std::vector<SchemeConfig> expand_grid(const SweepConfig& cfg, std::size_t v) {
    const std::size_t e = cfg.embed_dim;
    const auto buckets = cfg.bucket_grid.empty() ? default_bucket_grid(v) : cfg.bucket_grid;
    const auto dims = cfg.dim_grid.empty() ? default_dim_grid() : cfg.dim_grid;
    std::vector<SchemeConfig> out{make_config(SchemeKind::Uncompressed, v, e)};
    auto add = [&](SchemeConfig c) {
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    };
    for (auto kind : cfg.kinds) {
        switch (kind) {
            case SchemeKind::Uncompressed:
                break;
            case SchemeKind::ReducedDim:
                for (auto d : dims) {
                    if (d < e) add(make_config(kind, v, d));
                }
                break;
            case SchemeKind::Factorized:
                for (auto h : dims) {
                    if (h < e) add(make_config(kind, v, e, 0, h));
                }
                break;
            case SchemeKind::TruncateRare:
                for (auto k : buckets) {
                    if (k < v) add(make_config(kind, v, e, 0, 0, k));
                }
                break;
            default:
                if (!cfg.compression_grid.empty()) {
                    for (double r : cfg.compression_grid) add(make_config(kind, v, e, buckets_for_compression(kind, v, e, r)));
                } else {
                    for (auto m : buckets) add(make_config(kind, v, e, std::min(m, v)));
                }
        }
    }
    return out;
}

std::vector<RunReport> run_sweep(const SweepConfig& cfg, const SweepData& data) {
    cfg.validate();
    if (cfg.variant == Variant::PairwiseRankNet && !data.pairs) throw ConfigError("RankNet sweeps need pairwise data");
    const auto schemes = expand_grid(cfg, data.v());
    const std::string metric(metric_name(cfg.metric));

    auto spec_for = [&](const SchemeConfig& s) {
        NetworkSpec spec;
        spec.variant = cfg.variant;
        spec.scheme = s;
        spec.input_len = data.train.inputs.cols;
        spec.num_labels = data.num_labels;
        spec.dropout_rate = cfg.dropout_rate;
        return spec;
    };
    const std::size_t baseline_total = count_network_params(spec_for(schemes.front())).total();

    auto run_point = [&](const Task& task) {
        RunReport r;
        SchemeConfig s = task.scheme;
        s.seed = task.seed;
        r.scheme = std::string(kind_name(s.kind));
        r.kind_params = kind_params(s);
        r.m = s.kind == SchemeKind::TruncateRare ? s.keep_top : s.buckets;
        r.e = s.embed_dim;
        r.h = s.inner_dim;
        r.seed = task.seed;
        r.metric = metric;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto spec = spec_for(s);
            const auto counts = count_network_params(spec);
            r.total_params = counts.total();
            r.embedding_params = counts.embedding;
            r.compression_ratio = double(baseline_total) / double(r.total_params);
            Network net(spec, task.seed);
            TrainConfig tc = cfg.train;
            tc.seed = task.seed;
            if (cfg.variant == Variant::PairwiseRankNet) train_pairwise(net, *data.pairs, tc);
            else train(net, data.train, tc);
            const auto m = evaluate(net, data.eval, data.vocab.first_item_id());
            r.metric_value = cfg.metric == SweepMetric::Accuracy ? m.accuracy : m.ndcg;
            if (cfg.on_trained) cfg.on_trained(r, net, data);
        } catch (const std::exception& ex) {
            r.metric = "error";
            r.metric_value = std::numeric_limits<double>::quiet_NaN();
            r.kind_params += std::string(";error=") + ex.what();
        }
        r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    };

    // Baselines first, one per seed.
    std::vector<std::uint64_t> seeds;
    for (std::size_t k = 0; k < cfg.repeats; ++k) seeds.push_back(cfg.base_seed + k);
    std::vector<RunReport> baselines(seeds.size());
    parallel_for(seeds.size(), cfg.workers, [&](std::size_t i) { baselines[i] = run_point({schemes.front(), seeds[i]}); });

    std::vector<Task> tasks;
    for (std::size_t k = 1; k < schemes.size(); ++k) {
        for (auto seed : seeds) tasks.push_back({schemes[k], seed});
    }
    std::vector<RunReport> rest(tasks.size());
    parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) { rest[i] = run_point(tasks[i]); });

    std::map<std::uint64_t, double> baseline_metric;
    for (const auto& b : baselines) {
        baseline_metric[b.seed] = b.metric == "error" ? std::numeric_limits<double>::quiet_NaN() : b.metric_value;
    }
    std::vector<RunReport> all = baselines;
    all.insert(all.end(), rest.begin(), rest.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto& r = all[i];
        const double base = baseline_metric[r.seed];
        if (i < baselines.size() && r.metric != "error") {
            r.relative_loss_pct = 0.0;  // self-reference, even when the metric is zero
        } else if (r.metric == "error" || !std::isfinite(base) || base == 0.0) {
            r.relative_loss_pct = std::numeric_limits<double>::quiet_NaN();
        } else {
            r.relative_loss_pct = 100.0 * (base - r.metric_value) / base;
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const RunReport& a, const RunReport& b) {
        if (a.scheme != b.scheme) return a.scheme < b.scheme;
        if (a.compression_ratio != b.compression_ratio) return a.compression_ratio < b.compression_ratio;
        return a.seed < b.seed;
    });
    return all;
}

std::vector<RunReport> run_sweep(const SweepConfig& cfg) {
    return run_sweep(cfg, prepare_data(cfg.data, cfg.variant == Variant::PairwiseRankNet));
}

std::vector<SummaryRow> summarize(const std::vector<RunReport>& reports) {
    std::vector<SummaryRow> rows;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (const auto& r : reports) {
        std::string params = r.kind_params;
        if (const auto pos = params.find(";error="); pos != std::string::npos) params.resize(pos);
        const auto key = std::make_pair(r.scheme, params);
        auto [it, inserted] = index.try_emplace(key, rows.size());
        if (inserted) rows.push_back({r.scheme, params, r.compression_ratio});
        auto& row = rows[it->second];
        if (r.metric == "error") {
            ++row.errors;
            continue;
        }
        row.compression_ratio = r.compression_ratio;
        row.mean_metric += r.metric_value;
        row.mean_relative_loss_pct += r.relative_loss_pct;
        ++row.runs;
    }
    for (auto& row : rows) {
        if (row.runs) {
            row.mean_metric /= double(row.runs);
            row.mean_relative_loss_pct /= double(row.runs);
        }
    }
    return rows;
}

}  // namespace memcom
