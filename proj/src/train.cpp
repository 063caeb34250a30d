#include "memcom/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "memcom/error.hpp"

namespace memcom {
namespace {

using ParamList = std::vector<std::pair<std::string, GradPair*>>;

class Optimizer {
  public:
    Optimizer(const TrainConfig& cfg, const ParamList& params) : cfg_(cfg) {
        if (cfg.optimizer == OptimizerKind::Adam) {
            for (const auto& [name, p] : params) {
                m_.emplace_back(p->value.shape());
                v_.emplace_back(p->value.shape());
            }
        }
    }

    void step(const ParamList& params) {
        const double lr = cfg_.learning_rate;
        if (cfg_.optimizer == OptimizerKind::SGD) {
            for (const auto& [name, p] : params) {
                auto w = p->value.data();
                const auto g = p->grad.data();
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
            }
            return;
        }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto w = params[k].second->value.data();
            const auto g = params[k].second->grad.data();
            auto m = m_[k].data();
            auto v = v_[k].data();
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
            }
        }
    }

  private:
    const TrainConfig& cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t t_ = 0;
};

std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

[[noreturn]] void non_finite(std::size_t epoch, std::size_t batch, double lr, double loss) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "non-finite loss %g at epoch %zu batch %zu (lr=%g)", loss, epoch, batch, lr);
    throw NumericError(buf);
}

bool noise_active(const TrainConfig& cfg) {
    return cfg.noise && (cfg.noise->noise_multiplier > 0.0 || std::isfinite(cfg.noise->l2_clip));
}

// Clipped, noised mean of per-example gradients. Each example's gradient is
// the gradient of its own loss through the batch graph (batch statistics
// couple examples, so a batch of one would be degenerate).
void private_gradients(Network& net, const ParamList& params, const ForwardCache& cache, const Tensor& probs,
                       std::span<const std::int64_t> labels, const NoiseConfig& noise, std::mt19937_64& noise_rng) {
    const std::size_t b = labels.size();
    const std::size_t n_out = probs.dim(1);
    std::vector<Tensor> sum;
    for (const auto& [name, p] : params) sum.emplace_back(p->value.shape());
    Tensor dl({b, n_out});
    for (std::size_t i = 0; i < b; ++i) {
        net.zero_grad();
        dl.fill(0.0);
        for (std::size_t j = 0; j < n_out; ++j) dl.at(i, j) = probs.at(i, j);
        dl.at(i, static_cast<std::size_t>(labels[i])) -= 1.0;
        net.backward(cache, dl);
        double sq = 0.0;
        for (const auto& [name, p] : params) {
            for (double g : p->grad.data()) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        const double factor = norm > noise.l2_clip ? noise.l2_clip / norm : 1.0;
        for (std::size_t k = 0; k < params.size(); ++k) {
            const auto g = params[k].second->grad.data();
            auto s = sum[k].data();
            for (std::size_t j = 0; j < s.size(); ++j) s[j] += factor * g[j];
        }
    }
    const double std_dev = noise.noise_multiplier > 0.0 ? noise.noise_multiplier * noise.l2_clip : 0.0;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto g = params[k].second->grad.data();
        const auto s = sum[k].data();
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double n = std_dev > 0.0 ? std_dev * gauss(noise_rng) : 0.0;
            g[j] = (s[j] + n) / double(b);
        }
    }
}

IdBatch take_rows(const IdBatch& src, std::span<const std::size_t> rows) {
    IdBatch out(rows.size(), src.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = src.row(rows[i]);
        std::copy(r.begin(), r.end(), out.ids.begin() + static_cast<std::ptrdiff_t>(i * src.cols));
    }
    return out;
}

}  // namespace

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::SGD;
    if (name == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
    if (noise) {
        if (!(noise->l2_clip > 0.0)) throw ConfigError("l2 clip must be > 0");
        if (!(noise->noise_multiplier >= 0.0)) throw ConfigError("noise multiplier must be >= 0");
        if (noise->noise_multiplier > 0.0 && !std::isfinite(noise->l2_clip)) {
            throw ConfigError("a positive noise multiplier needs a finite l2 clip");
        }
    }
}

MetricReport train(Network& net, const ExampleBatch& data, const TrainConfig& cfg) {
    cfg.validate();
    if (net.spec().variant == Variant::PairwiseRankNet) {
        throw ConfigError("RankNet networks train on preference pairs; use train_pairwise");
    }
    if (data.size() == 0) throw ArgumentError("training set is empty");
    const auto params = net.parameters();
    Optimizer opt(cfg, params);
    std::mt19937_64 shuffle_rng(cfg.seed);
    std::mt19937_64 dropout_rng(mix(cfg.seed + 1));
    std::mt19937_64 noise_rng(mix(cfg.noise ? cfg.noise->seed ^ 0xA5A5A5A5ull : 0));
    const bool privatize = noise_active(cfg);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    MetricReport report;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(end));
            const ExampleBatch batch = data.subset(rows);
            auto fwd = net.forward(batch.inputs, true, dropout_rng);
            auto sx = ops::softmax_cross_entropy(fwd.logits, batch.labels);
            if (!std::isfinite(sx.loss)) non_finite(epoch, batch_index, cfg.learning_rate, sx.loss);
            loss_sum += sx.loss * double(rows.size());
            if (privatize) {
                private_gradients(net, params, fwd.cache, sx.probs, batch.labels, *cfg.noise, noise_rng);
            } else {
                net.zero_grad();
                net.backward(fwd.cache, sx.dlogits);
            }
            opt.step(params);
        }
        report.epoch_loss.push_back(loss_sum / double(order.size()));
    }
    report.loss = report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back();
    return report;
}

MetricReport train_pairwise(Network& net, const PairwiseBatch& data, const TrainConfig& cfg) {
    cfg.validate();
    if (net.spec().variant != Variant::PairwiseRankNet) throw ConfigError("train_pairwise needs a RankNet network");
    if (noise_active(cfg)) throw ConfigError("the noise hook is only available for softmax training");
    if (data.size() == 0) throw ArgumentError("training set is empty");
    const auto params = net.parameters();
    Optimizer opt(cfg, params);
    std::mt19937_64 shuffle_rng(cfg.seed);
    std::mt19937_64 dropout_rng(mix(cfg.seed + 1));

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    MetricReport report;
    std::vector<std::int64_t> hi, lo;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            const IdBatch users = take_rows(data.inputs, rows);
            hi.clear();
            lo.clear();
            for (auto r : rows) {
                hi.push_back(data.preferred[r]);
                lo.push_back(data.other[r]);
            }
            auto res = net.pairwise_forward(users, hi, lo, true, dropout_rng);
            if (!std::isfinite(res.loss)) non_finite(epoch, batch_index, cfg.learning_rate, res.loss);
            loss_sum += res.loss;
            net.zero_grad();
            net.pairwise_backward(res);
            const double inv = 1.0 / double(rows.size());
            for (const auto& [name, p] : params) {
                for (double& g : p->grad.data()) g *= inv;
            }
            opt.step(params);
        }
        report.epoch_loss.push_back(loss_sum / double(order.size()));
    }
    report.loss = report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back();
    return report;
}

}  // namespace memcom
