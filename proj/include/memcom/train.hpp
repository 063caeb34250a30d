#pragma once
// Mini-batch training (SGD or Adam) with an optional clip-and-noise hook.

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "memcom/dataset.hpp"
#include "memcom/network.hpp"

namespace memcom {

enum class OptimizerKind { SGD, Adam };

std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

/// Per-example gradients are clipped to l2_clip, summed, perturbed with
/// N(0, (noise_multiplier * l2_clip)^2) per coordinate and averaged.
struct NoiseConfig {
    double l2_clip = std::numeric_limits<double>::infinity();
    double noise_multiplier = 0.0;
    std::uint64_t seed = 0;
};

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 256;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    std::optional<NoiseConfig> noise;

    void validate() const;
};

struct MetricReport {
    double accuracy = 0.0;
    double ndcg = 0.0;
    double loss = 0.0;                // mean training loss of the final epoch
    std::vector<double> epoch_loss;   // mean training loss per epoch
};

/// Softmax cross-entropy training for Classifier / PointwiseRanker. Returns
/// the loss trajectory (accuracy and ndcg left at zero). Throws NumericError
/// naming epoch, batch and learning rate when the loss becomes non-finite.
MetricReport train(Network& net, const ExampleBatch& data, const TrainConfig& cfg);

/// RankNet training on preference pairs; loss is the mean pairwise logistic loss.
MetricReport train_pairwise(Network& net, const PairwiseBatch& data, const TrainConfig& cfg);

}  // namespace memcom
