#include "memcom/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "memcom/error.hpp"
#include "memcom/metrics.hpp"

namespace memcom {
namespace {

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double x : t.data()) m = std::max(m, std::abs(x));
    return m;
}

double qmax(unsigned bits) { return std::ldexp(1.0, int(bits) - 1) - 1.0; }

}  // namespace

void check_quant_bits(unsigned bits) {
    if (bits != 16 && bits != 8 && bits != 4) {
        throw ArgumentError("quantization width must be 16, 8 or 4 bits, got " + std::to_string(bits));
    }
}

double quant_scale(const Tensor& t, unsigned bits) {
    check_quant_bits(bits);
    const double m = max_abs(t);
    return m > 0.0 ? m / qmax(bits) : 1.0;
}

double fake_quantize(Tensor& t, unsigned bits) {
    check_quant_bits(bits);
    const double m = max_abs(t);
    if (m == 0.0) return 1.0;
    const double top = qmax(bits);
    const double scale = m / top;
    for (double& w : t.data()) {
        const double q = std::clamp(std::round(w / scale), -top, top);
        w = m * (q / top);
    }
    return scale;
}

std::size_t quantized_size_bytes(const Network& net, unsigned bits) {
    check_quant_bits(bits);
    std::size_t weights = 0, tensors = 0, buffers = 0;
    for (const auto& [name, p] : net.parameters()) {
        weights += p->value.size();
        ++tensors;
    }
    for (const auto& [name, b] : net.buffers()) buffers += b->size();
    return (weights * bits + 7) / 8 + 4 * tensors + 4 * buffers;
}

QuantizeSummary quantize_network(Network& net, unsigned bits) {
    QuantizeSummary s;
    s.bits = bits;
    s.size_bytes = quantized_size_bytes(net, bits);
    for (auto& [name, p] : net.parameters()) {
        const Tensor before = p->value;
        QuantizedTensor info{name, before.size(), fake_quantize(p->value, bits), 0.0};
        for (std::size_t i = 0; i < before.size(); ++i) {
            info.max_abs_error = std::max(info.max_abs_error, std::abs(p->value[i] - before[i]));
        }
        s.tensors.push_back(std::move(info));
    }
    return s;
}

QuantizeEval quantize_eval(const Network& net, unsigned bits, const ExampleBatch& eval, std::int64_t first_item_id) {
    Network copy = net;
    QuantizeEval out;
    out.summary = quantize_network(copy, bits);
    out.metrics = evaluate(copy, eval, first_item_id);
    return out;
}

}  // namespace memcom
