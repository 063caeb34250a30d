#pragma once
// Post-training linear (symmetric, per-tensor) quantization, simulated:
// weights are rounded to b-bit integers and immediately dequantized.
//
//   scale = max|w| / (2^(b-1) - 1)      (1 for an all-zero tensor)
//   q     = round(w / scale)
//   w'    = max|w| * (q / (2^(b-1) - 1))

#include <string>
#include <vector>

#include "memcom/dataset.hpp"
#include "memcom/network.hpp"
#include "memcom/train.hpp"

namespace memcom {

/// Supported widths: 16, 8, 4.
void check_quant_bits(unsigned bits);

double quant_scale(const Tensor& t, unsigned bits);

/// Quantize-dequantize `t`; returns the scale used.
double fake_quantize(Tensor& t, unsigned bits);

struct QuantizedTensor {
    std::string name;
    std::size_t count = 0;
    double scale = 0.0;
    double max_abs_error = 0.0;
};

struct QuantizeSummary {
    unsigned bits = 0;
    std::size_t size_bytes = 0;  // packed weights + one f32 scale per tensor + f32 buffers
    std::vector<QuantizedTensor> tensors;
};

/// Quantizes every trainable tensor of `net` in place. Batchnorm running
/// statistics stay at 32 bits.
QuantizeSummary quantize_network(Network& net, unsigned bits);

/// Storage size of `net` quantized at `bits` without touching it.
std::size_t quantized_size_bytes(const Network& net, unsigned bits);

struct QuantizeEval {
    QuantizeSummary summary;
    MetricReport metrics;
};

/// Evaluates a quantized copy of `net`; `net` itself is unchanged.
QuantizeEval quantize_eval(const Network& net, unsigned bits, const ExampleBatch& eval,
                           std::int64_t first_item_id = 0);

}  // namespace memcom
