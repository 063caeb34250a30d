#pragma once
// Layer primitives with hand-written backward passes.
//
// Forward functions are pure. Backward functions either return input
// gradients or accumulate parameter gradients into the GradPair they were
// given; they never zero anything.

#include <cstdint>
#include <optional>
#include <random>
#include <span>

#include "memcom/tensor.hpp"

namespace memcom::ops {

Tensor matmul(const Tensor& a, const Tensor& b);

struct MatmulGrads {
    Tensor da;
    Tensor db;
};
MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& dc);

// out[i,j,k] = a[i,j,k] * mult[i,j,0] (+ bias[i,j,0]). Rank-2 inputs (l
// folded away) are accepted as well: a is r x e, mult/bias r x 1.
Tensor broadcast_mul_add(const Tensor& a, const Tensor& mult, const Tensor* bias = nullptr);

struct BroadcastGrads {
    Tensor da;
    Tensor dmult;
    std::optional<Tensor> dbias;
};
BroadcastGrads broadcast_mul_add_backward(const Tensor& a, const Tensor& mult, bool has_bias, const Tensor& dout);

// Mean over the sequence axis of b x l x e; `pool` must equal l.
Tensor average_pool_rows(const Tensor& a, std::size_t pool);
Tensor average_pool_rows_backward(const Tensor& dout, std::size_t pool);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

struct DropoutResult {
    Tensor out;
    // Per-element scale (0 or 1/keep). Empty when dropout was the identity.
    Tensor mask;
};
// Inverted dropout: identity when train is false or rate is 0.
DropoutResult dropout(const Tensor& x, double rate, bool train, std::mt19937_64& rng);
Tensor dropout_backward(const Tensor& mask, const Tensor& dy);

struct BatchNorm {
    GradPair gamma;
    GradPair beta;
    Tensor running_mean;
    Tensor running_var;
    double eps = 1e-5;
    double momentum = 0.9;

    BatchNorm() = default;
    explicit BatchNorm(std::size_t features);
    std::size_t features() const { return gamma.value.size(); }
};

struct BatchNormCache {
    Tensor xhat;
    std::vector<double> inv_std;
    bool train = false;
};

// x is b x f. Training mode normalizes with batch statistics and updates the
// running estimates when update_running is set; eval mode uses running stats.
Tensor batchnorm_forward(BatchNorm& bn, const Tensor& x, bool train, BatchNormCache& cache,
                         bool update_running = true);
Tensor batchnorm_backward(BatchNorm& bn, const BatchNormCache& cache, const Tensor& dy);

struct Dense {
    GradPair weight;  // in x out
    GradPair bias;    // out

    Dense() = default;
    Dense(std::size_t in, std::size_t out);
    std::size_t in_features() const { return weight.value.dim(0); }
    std::size_t out_features() const { return weight.value.dim(1); }
};

Tensor dense_forward(const Dense& layer, const Tensor& x);
Tensor dense_backward(Dense& layer, const Tensor& x, const Tensor& dy);

Tensor softmax(const Tensor& logits);

struct SoftmaxXent {
    double loss = 0.0;  // mean over rows
    Tensor probs;
    Tensor dlogits;  // (probs - one_hot) / rows
};
SoftmaxXent softmax_cross_entropy(const Tensor& logits, std::span<const std::int64_t> labels);

}  // namespace memcom::ops
