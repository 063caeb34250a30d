#pragma once
// The three network shapes built on top of any embedding scheme:
//
//   Classifier:      embed -> avgpool(l) -> flatten -> relu -> dropout -> bn
//                    -> dense(e/2, relu) -> dropout -> bn -> dense(labels)
//   PointwiseRanker: the classifier without the dense(e/2) block
//   PairwiseRankNet: shared user tower (embed .. bn) concatenated with the
//                    candidate item's embedding, scored by
//                    dense(e/2, relu) -> dense(1); logistic pairwise loss.
//
// Logits are returned pre-softmax.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "memcom/id_batch.hpp"
#include "memcom/ops.hpp"
#include "memcom/scheme.hpp"

namespace memcom {

enum class Variant { Classifier, PointwiseRanker, PairwiseRankNet };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

inline constexpr std::size_t kDefaultInputLen = 128;

struct NetworkSpec {
    Variant variant = Variant::Classifier;
    SchemeConfig scheme;
    std::size_t input_len = kDefaultInputLen;
    std::size_t num_labels = 0;
    double dropout_rate = 0.2;

    std::size_t embed_out() const { return scheme.embed_dim; }
    std::size_t hidden_units() const { return scheme.embed_dim / 2; }
    void validate() const;

    KeyValues to_key_values() const;
    static NetworkSpec from_key_values(const KeyValues& kv);
};

struct ParamBreakdown {
    std::size_t embedding = 0;
    std::size_t dense = 0;
    std::size_t batchnorm = 0;  // trainable gamma/beta only
    std::size_t total() const { return embedding + dense + batchnorm; }
};

/// Trainable parameter count of a network built from `spec` without
/// allocating it.
ParamBreakdown count_network_params(const NetworkSpec& spec);

struct ForwardCache {
    IdBatch ids;
    Tensor pooled;   // b x e, pre-relu
    Tensor drop1_mask;
    ops::BatchNormCache bn1;
    Tensor user;     // b x e, output of bn1
    Tensor hidden_pre;  // b x e/2 (Classifier)
    Tensor drop2_mask;
    ops::BatchNormCache bn2;
    Tensor hidden;   // input to the output dense layer
    bool train = false;
};

struct ForwardResult {
    Tensor logits;  // b x num_labels
    ForwardCache cache;
};

struct ItemScoreCache {
    IdBatch items;   // b x 1
    Tensor concat;   // b x 2e
    Tensor hidden_pre;  // b x e/2
    Tensor hidden;
};

struct PairwiseResult {
    Tensor score_hi;  // b
    Tensor score_lo;  // b
    double loss = 0.0;  // sum over the batch of log(1 + exp(-(hi - lo)))
    ForwardCache user;
    ItemScoreCache hi;
    ItemScoreCache lo;
};

class Network {
  public:
    Network(NetworkSpec spec, std::uint64_t seed);

    const NetworkSpec& spec() const noexcept { return spec_; }
    SchemeParams& scheme() noexcept { return scheme_; }
    const SchemeParams& scheme() const noexcept { return scheme_; }

    /// Named trainable parameters; names are unique.
    std::vector<std::pair<std::string, GradPair*>> parameters();
    std::vector<std::pair<std::string, const GradPair*>> parameters() const;
    /// Non-trainable state (batchnorm running statistics).
    std::vector<std::pair<std::string, Tensor*>> buffers();
    std::vector<std::pair<std::string, const Tensor*>> buffers() const;

    std::size_t trainable_count() const;
    ParamBreakdown param_breakdown() const;
    void zero_grad();

    ForwardResult forward(const IdBatch& ids, bool train, std::mt19937_64& rng);
    /// Accumulates parameter gradients given d(loss)/d(logits).
    void backward(const ForwardCache& cache, const Tensor& dlogits);

    /// Siamese scoring of two candidate items against the same users.
    PairwiseResult pairwise_forward(const IdBatch& users, std::span<const std::int64_t> item_hi,
                                    std::span<const std::int64_t> item_lo, bool train, std::mt19937_64& rng);
    /// Accumulates gradients of result.loss.
    void pairwise_backward(const PairwiseResult& result);

    /// Scores for each candidate: softmax probability of the candidate label
    /// (Classifier / PointwiseRanker) or the RankNet score of the candidate
    /// item id. `user` is a single 1 x l row. Evaluation mode.
    std::vector<double> score_candidates(const IdBatch& user, std::span<const std::int64_t> candidates);

  private:
    Tensor user_tower(const IdBatch& ids, bool train, std::mt19937_64& rng, ForwardCache& cache,
                      bool update_running = true);
    void user_tower_backward(const ForwardCache& cache, const Tensor& duser);
    Tensor score_items(const Tensor& user, std::span<const std::int64_t> items, ItemScoreCache& cache);
    Tensor score_items_backward(const ItemScoreCache& cache, const Tensor& dscore);

    NetworkSpec spec_;
    SchemeParams scheme_;
    ops::BatchNorm bn1_;
    ops::Dense dense1_;  // Classifier hidden layer, or RankNet scorer hidden layer
    ops::BatchNorm bn2_;  // Classifier only
    ops::Dense out_;
};

/// Candidates sorted by descending score, ties by ascending id.
std::vector<std::int64_t> rank_by_scores(std::span<const double> scores, std::span<const std::int64_t> ids);

std::vector<std::int64_t> rank_items(Network& net, const IdBatch& user, std::span<const std::int64_t> candidates);

void save_network(std::ostream& out, const Network& net);
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(std::istream& in);
Network load_network(const std::filesystem::path& path);

}  // namespace memcom
