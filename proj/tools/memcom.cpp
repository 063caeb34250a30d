// memcom: experiment driver for the embedding compression library.
//
// Every verb accepts --config FILE with flat `key=value` lines; a key names a
// long flag of that verb (dashes or underscores). Flags given on the command
// line win over the file.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "memcom/collisions.hpp"
#include "memcom/config_file.hpp"
#include "memcom/dataset.hpp"
#include "memcom/error.hpp"
#include "memcom/fixed_size.hpp"
#include "memcom/kernels.hpp"
#include "memcom/metrics.hpp"
#include "memcom/microbench.hpp"
#include "memcom/quantize.hpp"
#include "memcom/report.hpp"
#include "memcom/sweep.hpp"
#include "memcom/synthetic.hpp"
#include "memcom/train.hpp"

using namespace memcom;

namespace {

struct DataFlags {
    DataSpec spec;
    std::string dataset;
};

void add_synthetic_flags(CLI::App* app, SyntheticConfig& s) {
    app->add_option("--v-items", s.v_items, "Synthetic item catalogue size")->capture_default_str();
    app->add_option("--users", s.n_users, "Synthetic user count")->capture_default_str();
    app->add_option("--zipf-s", s.zipf_s, "Zipf exponent of item popularity")->capture_default_str();
    app->add_option("--min-len", s.min_len, "Shortest synthetic history")->capture_default_str();
    app->add_option("--max-len", s.max_len, "Longest synthetic history")->capture_default_str();
    app->add_option("--countries", s.n_countries, "Number of country keys")->capture_default_str();
    app->add_option("--clusters", s.n_clusters, "Latent user clusters")->capture_default_str();
    app->add_option("--cluster-boost", s.cluster_boost, "Home-item weight multiplier")->capture_default_str();
    app->add_option("--data-seed", s.seed, "Generator seed")->capture_default_str();
}

void add_data_flags(CLI::App* app, DataFlags& d) {
    app->add_option("--dataset", d.dataset, "TSV dataset (default: synthetic data)");
    add_synthetic_flags(app, d.spec.synthetic);
    app->add_option("--max-items", d.spec.max_items, "Cap the input vocabulary to the most frequent items")
        ->capture_default_str();
    app->add_option("--num-labels", d.spec.num_labels, "Output vocabulary size (0: all items)")->capture_default_str();
    app->add_option("--eval-every", d.spec.eval_every, "Hold out every n-th user for evaluation")->capture_default_str();
    app->add_option("--popularity-floor", d.spec.examples.popularity_floor, "Minimum label frequency")
        ->capture_default_str();
    app->add_option("--max-per-user", d.spec.examples.max_per_user, "Examples per user")->capture_default_str();
}

struct TrainFlags {
    TrainConfig cfg;
    std::string optimizer = "adam";
};

void add_train_flags(CLI::App* app, TrainFlags& t) {
    app->add_option("--optimizer", t.optimizer, "sgd or adam")->capture_default_str();
    app->add_option("--lr", t.cfg.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--batch-size", t.cfg.batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--epochs", t.cfg.epochs, "Training epochs")->capture_default_str();
}

TrainConfig finish(TrainFlags& t) {
    t.cfg.optimizer = parse_optimizer(t.optimizer);
    return t.cfg;
}

DataSpec finish(DataFlags& d) {
    d.spec.dataset_path = d.dataset;
    return d.spec;
}

struct ModelFlags {
    std::string scheme = "memcom_nobias";
    std::string variant = "classifier";
    std::size_t e = 64;
    std::size_t m = 0;
    std::size_t h = 0;
    std::size_t keep_top = 0;
    double dropout = 0.2;
    std::uint64_t seed = 1;
};

void add_model_flags(CLI::App* app, ModelFlags& m) {
    app->add_option("--scheme", m.scheme, "Embedding scheme kind")->capture_default_str();
    app->add_option("--variant", m.variant, "classifier, pointwise or ranknet")->capture_default_str();
    app->add_option("--embed-dim", m.e, "Embedding size e")->capture_default_str();
    app->add_option("--buckets", m.m, "Bucket count m (0: v/10)")->capture_default_str();
    app->add_option("--inner-dim", m.h, "Factorized inner size h")->capture_default_str();
    app->add_option("--keep-top", m.keep_top, "TruncateRare kept ids (0: v/10)")->capture_default_str();
    app->add_option("--dropout", m.dropout, "Dropout rate")->capture_default_str();
    app->add_option("--seed", m.seed, "Model and training seed")->capture_default_str();
}

NetworkSpec model_spec(const ModelFlags& f, const SweepData& data) {
    NetworkSpec s;
    s.variant = parse_variant(f.variant);
    s.scheme.kind = parse_kind(f.scheme);
    s.scheme.vocab = data.v();
    s.scheme.embed_dim = f.e;
    s.scheme.buckets = is_bucketed(s.scheme.kind) ? (f.m ? f.m : std::max<std::size_t>(1, data.v() / 10)) : 0;
    s.scheme.inner_dim = f.h;
    s.scheme.keep_top =
        s.scheme.kind == SchemeKind::TruncateRare ? (f.keep_top ? f.keep_top : std::max<std::size_t>(1, data.v() / 10)) : 0;
    s.scheme.seed = f.seed;
    s.input_len = data.train.inputs.cols;
    s.num_labels = data.num_labels;
    s.dropout_rate = f.dropout;
    s.validate();
    return s;
}

MetricReport train_model(Network& net, const SweepData& data, TrainConfig tc, std::uint64_t seed) {
    tc.seed = seed;
    return net.spec().variant == Variant::PairwiseRankNet ? train_pairwise(net, *data.pairs, tc)
                                                          : train(net, data.train, tc);
}

void print_data_summary(const SweepData& d) {
    std::printf("data: v=%zu items=%zu countries=%zu labels=%zu train=%zu eval=%zu\n", d.v(), d.vocab.n_items(),
                d.vocab.n_countries(), d.num_labels, d.train.size(), d.eval.size());
}

// Fills options of `app` that were not given on the command line from a flat
// key=value file.
void apply_config(CLI::App* app, const std::string& path) {
    if (path.empty()) return;
    for (const auto& [key, value] : load_key_values(path)) {
        std::string flag = key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (flag == "config") throw ConfigError("config files cannot include other config files");
        CLI::Option* opt = nullptr;
        try {
            opt = app->get_option("--" + flag);
        } catch (const CLI::OptionNotFound&) {
            throw ConfigError("config key '" + key + "' is not a flag of '" + app->get_name() + "'");
        }
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

struct ErrorClass {
    const char* kind;
    int code;
};

ErrorClass classify(const std::exception& ex) {
    if (dynamic_cast<const ConfigError*>(&ex)) return {"config", 2};
    if (dynamic_cast<const ArgumentError*>(&ex)) return {"argument", 2};
    if (dynamic_cast<const DimensionError*>(&ex)) return {"dimension", 2};
    if (dynamic_cast<const IndexError*>(&ex)) return {"index", 2};
    if (dynamic_cast<const IoError*>(&ex)) return {"io", 3};
    if (dynamic_cast<const NumericError*>(&ex)) return {"numeric", 4};
    return {"internal", 1};
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embedding-table compression experiments"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;
    auto add_config = [&](CLI::App* sub) {
        sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        sub->add_option("--config", config_path, "Flat key=value file supplying any flag");
    };

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic power-law dataset");
    add_config(gen);
    SyntheticConfig gen_cfg;
    std::string gen_out, gen_manifest;
    add_synthetic_flags(gen, gen_cfg);
    gen->add_option("--out", gen_out, "Output TSV path")->required();
    gen->add_option("--manifest", gen_manifest, "Manifest path (default: <out>.manifest)");

    // convert-movielens
    auto* conv = app.add_subcommand("convert-movielens", "Convert MovieLens ratings to the TSV format");
    add_config(conv);
    std::string conv_in, conv_out;
    conv->add_option("--in", conv_in, "ratings.csv or ratings.dat")->required();
    conv->add_option("--out", conv_out, "Output TSV path")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train one model and optionally save it");
    add_config(tr);
    DataFlags tr_data;
    TrainFlags tr_train;
    ModelFlags tr_model;
    std::string tr_save;
    add_data_flags(tr, tr_data);
    add_train_flags(tr, tr_train);
    add_model_flags(tr, tr_model);
    tr->add_option("--save", tr_save, "Checkpoint path");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Train every scheme over its grid and write a CSV report");
    add_config(sw);
    DataFlags sw_data;
    TrainFlags sw_train;
    SweepConfig sw_cfg;
    std::vector<std::string> sw_schemes{"naive_hash", "qr_mult", "memcom_nobias"};
    std::string sw_out = "sweep.csv", sw_metric = "accuracy", sw_variant = "classifier";
    add_data_flags(sw, sw_data);
    add_train_flags(sw, sw_train);
    sw->add_option("--schemes", sw_schemes, "Scheme kinds (comma separated)")->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->capture_default_str();
    sw->add_option("--bucket-grid", sw_cfg.bucket_grid, "Bucket counts (default: v, v/2, v/4, v/10, v/20, v/100)")
        ->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sw->add_option("--dim-grid", sw_cfg.dim_grid, "Dimensions for reduced_dim / factorized")->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sw->add_option("--compression-grid", sw_cfg.compression_grid, "Embedding compression targets (replaces buckets)")
        ->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sw->add_option("--embed-dim", sw_cfg.embed_dim, "Baseline embedding size")->capture_default_str();
    sw->add_option("--repeats", sw_cfg.repeats, "Seeds per grid point")->capture_default_str();
    sw->add_option("--seed", sw_cfg.base_seed, "First seed")->capture_default_str();
    sw->add_option("--metric", sw_metric, "accuracy or ndcg")->capture_default_str();
    sw->add_option("--variant", sw_variant, "classifier, pointwise or ranknet")->capture_default_str();
    sw->add_option("--dropout", sw_cfg.dropout_rate, "Dropout rate")->capture_default_str();
    sw->add_option("--workers", sw_cfg.workers, "Parallel sweep points")->capture_default_str();
    sw->add_option("--out", sw_out, "CSV report path")->capture_default_str();

    // fixed-size
    auto* fs = app.add_subcommand("fixed-size", "Widest embedding per bucket count under a model-size budget");
    add_config(fs);
    FixedSizeQuery fs_q;
    double fs_budget_mb = 20.0;
    std::string fs_scheme = "memcom_nobias", fs_variant = "classifier";
    fs->add_option("--budget-mb", fs_budget_mb, "Budget in MB (10^6 bytes)")->capture_default_str();
    fs->add_option("--scheme", fs_scheme, "Scheme kind")->capture_default_str();
    fs->add_option("--variant", fs_variant, "classifier, pointwise or ranknet")->capture_default_str();
    fs->add_option("--v", fs_q.v, "Input vocabulary size")->required();
    fs->add_option("--num-labels", fs_q.num_labels, "Output vocabulary size")->required();
    fs->add_option("--bucket-grid", fs_q.buckets, "Bucket counts")->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->required();
    fs->add_option("--max-dim", fs_q.max_dim, "Largest embedding size searched")->capture_default_str();

    // quantize
    auto* qz = app.add_subcommand("quantize", "Evaluate a trained model under 16/8/4-bit linear quantization");
    add_config(qz);
    DataFlags qz_data;
    TrainFlags qz_train;
    ModelFlags qz_model;
    std::string qz_load;
    std::vector<unsigned> qz_bits{16, 8, 4};
    add_data_flags(qz, qz_data);
    add_train_flags(qz, qz_train);
    add_model_flags(qz, qz_model);
    qz->add_option("--model", qz_load, "Checkpoint to evaluate (default: train one)");
    qz->add_option("--bits", qz_bits, "Bit widths")->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->capture_default_str();

    // noise-sweep
    auto* ns = app.add_subcommand("noise-sweep", "Train with clipped, noised per-example gradients");
    add_config(ns);
    DataFlags ns_data;
    TrainFlags ns_train;
    ModelFlags ns_model;
    std::vector<double> ns_sigmas{0.0, 0.5, 1.0, 2.0};
    double ns_clip = 1.0;
    std::uint64_t ns_seed = 0;
    add_data_flags(ns, ns_data);
    add_train_flags(ns, ns_train);
    add_model_flags(ns, ns_model);
    ns->add_option("--noise-multipliers", ns_sigmas, "Noise multipliers")->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->capture_default_str();
    ns->add_option("--l2-clip", ns_clip, "Per-example gradient clip")->capture_default_str();
    ns->add_option("--noise-seed", ns_seed, "Noise stream seed")->capture_default_str();

    // microbench
    auto* mb = app.add_subcommand("microbench", "Gather lookup versus one-hot matmul, embedding stage only");
    add_config(mb);
    MicrobenchConfig mb_cfg;
    std::string mb_isa;
    mb->add_option("--v", mb_cfg.v, "Vocabulary size")->capture_default_str();
    mb->add_option("--e", mb_cfg.e, "Embedding size")->capture_default_str();
    mb->add_option("--m", mb_cfg.m, "Bucket count")->capture_default_str();
    mb->add_option("--batch", mb_cfg.batch, "Batch size")->capture_default_str();
    mb->add_option("--iterations", mb_cfg.iterations, "Timed iterations")->capture_default_str();
    mb->add_option("--warmup", mb_cfg.warmup, "Discarded iterations")->capture_default_str();
    mb->add_option("--isa", mb_isa, "Force kernel variant: scalar or avx2");

    // audit-uniqueness
    auto* au = app.add_subcommand("audit-uniqueness", "Fraction of same-bucket MEmCom multipliers that differ");
    add_config(au);
    std::string au_model;
    double au_threshold = 1e-5;
    std::uint64_t au_seed = 0;
    au->add_option("--model", au_model, "MEmCom model checkpoint")->required();
    au->add_option("--threshold", au_threshold, "Minimum difference")->capture_default_str();
    au->add_option("--seed", au_seed, "Pair sampling seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: usage: %s\n", one_line(e.what()).c_str());
        return 2;
    }

    try {
        for (auto* sub : app.get_subcommands()) apply_config(sub, config_path);

        if (gen->parsed()) {
            const Dataset data = generate_synthetic(gen_cfg);
            write_dataset(std::filesystem::path(gen_out), data);
            const std::string manifest = gen_manifest.empty() ? gen_out + ".manifest" : gen_manifest;
            std::ofstream mf(manifest);
            if (!mf) throw IoError("cannot open " + manifest + " for writing");
            write_key_values(mf, synthetic_manifest(gen_cfg, data));
            std::printf("wrote %zu users to %s\n", data.size(), gen_out.c_str());
        } else if (conv->parsed()) {
            std::ifstream in(conv_in);
            if (!in) throw IoError("cannot open " + conv_in);
            const Dataset data = convert_movielens(in);
            write_dataset(std::filesystem::path(conv_out), data);
            std::printf("wrote %zu users to %s\n", data.size(), conv_out.c_str());
        } else if (tr->parsed()) {
            const bool pairwise = parse_variant(tr_model.variant) == Variant::PairwiseRankNet;
            const SweepData data = prepare_data(finish(tr_data), pairwise);
            print_data_summary(data);
            Network net(model_spec(tr_model, data), tr_model.seed);
            const auto hist = train_model(net, data, finish(tr_train), tr_model.seed);
            const auto m = evaluate(net, data.eval, data.vocab.first_item_id());
            std::printf("params=%zu final_loss=%.6g accuracy=%.6g ndcg=%.6g\n", net.trainable_count(), hist.loss,
                        m.accuracy, m.ndcg);
            if (!tr_save.empty()) save_network(std::filesystem::path(tr_save), net);
        } else if (sw->parsed()) {
            sw_cfg.data = finish(sw_data);
            sw_cfg.train = finish(sw_train);
            sw_cfg.metric = parse_metric(sw_metric);
            sw_cfg.variant = parse_variant(sw_variant);
            sw_cfg.kinds.clear();
            for (const auto& s : sw_schemes) sw_cfg.kinds.push_back(parse_kind(s));
            const SweepData data = prepare_data(sw_cfg.data, sw_cfg.variant == Variant::PairwiseRankNet);
            print_data_summary(data);
            const auto reports = run_sweep(sw_cfg, data);
            emit_report(std::filesystem::path(sw_out), reports);
            std::printf("%-14s %-28s %10s %12s %14s %5s\n", "scheme", "params", "ratio", sw_metric.c_str(),
                        "rel_loss_pct", "runs");
            for (const auto& row : summarize(reports)) {
                std::printf("%-14s %-28s %10.4g %12.6g %14.4f %5zu%s\n", row.scheme.c_str(), row.kind_params.c_str(),
                            row.compression_ratio, row.mean_metric, row.mean_relative_loss_pct, row.runs,
                            row.errors ? " (errors)" : "");
            }
            std::printf("wrote %zu rows to %s\n", reports.size(), sw_out.c_str());
        } else if (fs->parsed()) {
            if (!(fs_budget_mb > 0.0)) throw ConfigError("budget must be > 0");
            fs_q.budget_bytes = static_cast<std::size_t>(std::llround(fs_budget_mb * 1e6));
            fs_q.kind = parse_kind(fs_scheme);
            fs_q.variant = parse_variant(fs_variant);
            std::printf("%10s %6s %14s %10s\n", "m", "e", "bytes", "of_budget");
            for (const auto& entry : fixed_size_search(fs_q)) {
                if (entry.e) {
                    std::printf("%10zu %6zu %14zu %10.4f\n", entry.m, *entry.e, entry.bytes,
                                double(entry.bytes) / double(fs_q.budget_bytes));
                } else {
                    std::printf("%10zu %6s %14s %10s\n", entry.m, "-", "infeasible", "-");
                }
            }
        } else if (qz->parsed()) {
            const bool pairwise = parse_variant(qz_model.variant) == Variant::PairwiseRankNet;
            const SweepData data = prepare_data(finish(qz_data), pairwise);
            print_data_summary(data);
            Network net = qz_load.empty() ? Network(model_spec(qz_model, data), qz_model.seed)
                                          : load_network(std::filesystem::path(qz_load));
            if (qz_load.empty()) train_model(net, data, finish(qz_train), qz_model.seed);
            const auto base = evaluate(net, data.eval, data.vocab.first_item_id());
            std::printf("%5s %12s %10s %10s\n", "bits", "bytes", "accuracy", "ndcg");
            std::printf("%5d %12zu %10.6f %10.6f\n", 32, 4 * net.trainable_count() + 4 * [&] {
                std::size_t n = 0;
                for (const auto& [name, b] : net.buffers()) n += b->size();
                return n;
            }(), base.accuracy, base.ndcg);
            for (unsigned bits : qz_bits) {
                const auto q = quantize_eval(net, bits, data.eval, data.vocab.first_item_id());
                std::printf("%5u %12zu %10.6f %10.6f\n", bits, q.summary.size_bytes, q.metrics.accuracy, q.metrics.ndcg);
            }
        } else if (ns->parsed()) {
            const SweepData data = prepare_data(finish(ns_data));
            print_data_summary(data);
            const NetworkSpec spec = model_spec(ns_model, data);
            std::printf("%8s %10s %10s %10s\n", "sigma", "loss", "accuracy", "ndcg");
            for (double sigma : ns_sigmas) {
                Network net(spec, ns_model.seed);
                TrainConfig tc = finish(ns_train);
                tc.noise = NoiseConfig{ns_clip, sigma, ns_seed};
                const auto hist = train_model(net, data, tc, ns_model.seed);
                const auto m = evaluate(net, data.eval, data.vocab.first_item_id());
                std::printf("%8.3g %10.6g %10.6f %10.6f\n", sigma, hist.loss, m.accuracy, m.ndcg);
            }
        } else if (mb->parsed()) {
            if (mb_isa == "scalar") kernels::force_isa(kernels::Isa::Scalar);
            else if (mb_isa == "avx2") kernels::force_isa(kernels::Isa::Avx2);
            else if (!mb_isa.empty()) throw ConfigError("unknown isa '" + mb_isa + "' (expected scalar or avx2)");
            const auto r = microbench_lookup_vs_onehot(mb_cfg);
            std::printf("isa=%s v=%zu e=%zu m=%zu batch=%zu\n", std::string(kernels::isa_name(kernels::active_isa())).c_str(),
                        mb_cfg.v, mb_cfg.e, mb_cfg.m, mb_cfg.batch);
            std::printf("table:  %12.1f ns/inference  peak %zu bytes  model %zu values\n", r.table_ns_per_inference,
                        r.table_peak_bytes, r.table_predicted_values);
            std::printf("onehot: %12.1f ns/inference  peak %zu bytes  model %zu values\n", r.onehot_ns_per_inference,
                        r.onehot_peak_bytes, r.onehot_predicted_values);
            std::printf("speedup: %.1fx\n", r.speedup());
        } else if (au->parsed()) {
            const Network net = load_network(std::filesystem::path(au_model));
            const auto rep = uniqueness_audit(net.scheme(), au_threshold, au_seed);
            std::printf("pairs_checked=%zu fraction_distinct=%.6f sampled=%s\n", rep.pairs_checked,
                        rep.fraction_distinct, rep.sampled ? "yes" : "no");
        }
    } catch (const std::exception& ex) {
        const auto c = classify(ex);
        std::fprintf(stderr, "error: %s: %s\n", c.kind, one_line(ex.what()).c_str());
        return c.code;
    }
    return 0;
}
