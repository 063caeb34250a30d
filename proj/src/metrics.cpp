#include "memcom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "memcom/error.hpp"

namespace memcom {

std::size_t label_rank(std::span<const double> scores, std::size_t label) {
    if (label >= scores.size()) throw IndexError("label outside the output vocabulary", static_cast<long long>(label));
    const double s = scores[label];
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (scores[j] > s || (scores[j] == s && j < label)) ++ahead;
    }
    return ahead + 1;
}

double ndcg_at_rank(std::size_t rank, std::optional<std::size_t> k) {
    if (rank < 1) throw ArgumentError("rank starts at 1");
    if (k && rank > *k) return 0.0;
    return 1.0 / std::log2(1.0 + double(rank));
}

std::size_t argmax(std::span<const double> scores) {
    if (scores.empty()) throw ArgumentError("argmax of an empty score vector");
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.size(); ++j) {
        if (scores[j] > scores[best]) best = j;
    }
    return best;
}

MetricSums& MetricSums::operator+=(const MetricSums& o) {
    correct += o.correct;
    ndcg += o.ndcg;
    count += o.count;
    return *this;
}

MetricSums score_metrics(const Tensor& scores, std::span<const std::int64_t> labels, std::optional<std::size_t> k) {
    if (scores.rank() != 2 || scores.dim(0) != labels.size()) {
        throw DimensionError("score matrix " + shape_string(scores.shape()) + " does not match " +
                             std::to_string(labels.size()) + " labels");
    }
    MetricSums m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) throw IndexError("label outside the output vocabulary", labels[i]);
        const auto row = scores.row(i);
        const std::size_t rank = label_rank(row, static_cast<std::size_t>(labels[i]));
        m.correct += rank == 1 ? 1.0 : 0.0;
        m.ndcg += ndcg_at_rank(rank, k);
        ++m.count;
    }
    return m;
}

MetricReport evaluate(Network& net, const ExampleBatch& eval, std::int64_t first_item_id,
                      std::optional<std::size_t> k, std::size_t batch_size) {
    if (eval.size() == 0) throw ArgumentError("evaluation set is empty");
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    MetricSums sums;
    std::mt19937_64 unused(0);  // eval mode draws nothing
    if (net.spec().variant == Variant::PairwiseRankNet) {
        if (first_item_id <= 0) throw ArgumentError("RankNet evaluation needs the first item id");
        std::vector<std::int64_t> candidates(net.spec().num_labels);
        std::iota(candidates.begin(), candidates.end(), first_item_id);
        Tensor scores({1, candidates.size()});
        for (std::size_t i = 0; i < eval.size(); ++i) {
            const IdBatch user(1, eval.inputs.cols,
                               std::vector<std::int64_t>(eval.inputs.row(i).begin(), eval.inputs.row(i).end()));
            const auto s = net.score_candidates(user, candidates);
            std::copy(s.begin(), s.end(), scores.raw());
            sums += score_metrics(scores, std::span(eval.labels).subspan(i, 1), k);
        }
    } else {
        std::vector<std::size_t> rows;
        for (std::size_t start = 0; start < eval.size(); start += batch_size) {
            const std::size_t end = std::min(eval.size(), start + batch_size);
            rows.resize(end - start);
            std::iota(rows.begin(), rows.end(), start);
            const ExampleBatch batch = eval.subset(rows);
            // Softmax is monotone, so ranking raw logits matches ranking probabilities.
            const auto fwd = net.forward(batch.inputs, false, unused);
            sums += score_metrics(fwd.logits, batch.labels, k);
        }
    }
    MetricReport r;
    r.accuracy = sums.accuracy();
    r.ndcg = sums.mean_ndcg();
    return r;
}

double evaluate_accuracy(Network& net, const ExampleBatch& eval, std::size_t batch_size) {
    return evaluate(net, eval, 0, std::nullopt, batch_size).accuracy;
}

double evaluate_ndcg(Network& net, const ExampleBatch& eval, std::optional<std::size_t> k, std::size_t batch_size) {
    return evaluate(net, eval, 0, k, batch_size).ndcg;
}

}  // namespace memcom
