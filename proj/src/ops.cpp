#include "memcom/ops.hpp"

#include <algorithm>
#include <cmath>

#include "memcom/error.hpp"
#include "memcom/kernels.hpp"

namespace memcom::ops {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                             shape_string(t.shape()));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
    }
    Tensor c({a.dim(0), b.dim(1)}, 0.0);
    kernels::active<double>().gemm(a.raw(), b.raw(), c.raw(), a.dim(0), a.dim(1), b.dim(1));
    return c;
}

MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& dc) {
    const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
    if (dc.shape() != Shape{p, r}) throw DimensionError("matmul upstream gradient has shape " + shape_string(dc.shape()));
    const auto& k = kernels::active<double>();
    MatmulGrads g{Tensor(a.shape(), 0.0), Tensor(b.shape(), 0.0)};
    for (std::size_t i = 0; i < p; ++i) {
        const double* dci = dc.raw() + i * r;
        for (std::size_t kk = 0; kk < q; ++kk) {
            g.da[i * q + kk] = k.dot(dci, b.raw() + kk * r, r);
            k.axpy(a[i * q + kk], dci, g.db.raw() + kk * r, r);
        }
    }
    return g;
}

namespace {

struct BroadcastLayout {
    std::size_t rows;
    std::size_t width;
};

BroadcastLayout broadcast_layout(const Tensor& a, const Tensor& mult, const Tensor* bias) {
    if (a.rank() != 2 && a.rank() != 3) throw DimensionError("broadcast_mul_add expects rank 2 or 3, got " + shape_string(a.shape()));
    auto check = [&](const Tensor& t, const char* name) {
        if (t.rank() != a.rank()) {
            throw DimensionError(std::string(name) + " rank differs: " + shape_string(a.shape()) + " vs " +
                                 shape_string(t.shape()));
        }
        if (t.shape().back() != 1) {
            throw DimensionError(std::string(name) + " trailing extent must be 1, got " + shape_string(t.shape()));
        }
        for (std::size_t d = 0; d + 1 < a.rank(); ++d) {
            if (t.dim(d) != a.dim(d)) {
                throw DimensionError(std::string(name) + " leading extents differ: " + shape_string(a.shape()) +
                                     " vs " + shape_string(t.shape()));
            }
        }
    };
    check(mult, "multiplier");
    if (bias) check(*bias, "bias");
    const std::size_t width = a.shape().back();
    return {a.size() / width, width};
}

}  // namespace

Tensor broadcast_mul_add(const Tensor& a, const Tensor& mult, const Tensor* bias) {
    const auto [rows, width] = broadcast_layout(a, mult, bias);
    const auto& k = kernels::active<double>();
    Tensor out(a.shape(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double shift = bias ? (*bias)[r] : 0.0;
        if (bias) {
            k.scale_shift(a.raw() + r * width, mult[r], shift, out.raw() + r * width, width);
        } else {
            // Without a bias the output is exactly a * mult (no "+ 0.0" that could flip -0).
            k.scale_shift(a.raw() + r * width, mult[r], -0.0, out.raw() + r * width, width);
        }
    }
    return out;
}

BroadcastGrads broadcast_mul_add_backward(const Tensor& a, const Tensor& mult, bool has_bias, const Tensor& dout) {
    const auto [rows, width] = broadcast_layout(a, mult, nullptr);
    if (dout.shape() != a.shape()) throw DimensionError("broadcast upstream gradient has shape " + shape_string(dout.shape()));
    const auto& k = kernels::active<double>();
    BroadcastGrads g{Tensor(a.shape(), 0.0), Tensor(mult.shape(), 0.0), std::nullopt};
    if (has_bias) g.dbias = Tensor(mult.shape(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* d = dout.raw() + r * width;
        k.scale_shift(d, mult[r], -0.0, g.da.raw() + r * width, width);
        g.dmult[r] = k.dot(d, a.raw() + r * width, width);
        if (has_bias) {
            double s = 0.0;
            for (std::size_t c = 0; c < width; ++c) s += d[c];
            (*g.dbias)[r] = s;
        }
    }
    return g;
}

Tensor average_pool_rows(const Tensor& a, std::size_t pool) {
    require_rank(a, 3, "average_pool_rows");
    const std::size_t b = a.dim(0), l = a.dim(1), e = a.dim(2);
    if (pool != l) {
        throw ConfigError("pool size " + std::to_string(pool) + " must equal sequence length " + std::to_string(l));
    }
    const auto& k = kernels::active<double>();
    Tensor out({b, 1, e}, 0.0);
    const double inv = 1.0 / static_cast<double>(l);
    for (std::size_t i = 0; i < b; ++i) {
        double* acc = out.raw() + i * e;
        for (std::size_t j = 0; j < l; ++j) k.add(a.raw() + (i * l + j) * e, acc, e);
        for (std::size_t c = 0; c < e; ++c) acc[c] *= inv;
    }
    return out;
}

Tensor average_pool_rows_backward(const Tensor& dout, std::size_t pool) {
    require_rank(dout, 3, "average_pool_rows_backward");
    const std::size_t b = dout.dim(0), e = dout.dim(2);
    if (dout.dim(1) != 1) throw DimensionError("pooled gradient must be b x 1 x e, got " + shape_string(dout.shape()));
    Tensor da({b, pool, e}, 0.0);
    const double inv = 1.0 / static_cast<double>(pool);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < pool; ++j) {
            for (std::size_t c = 0; c < e; ++c) da.at(i, j, c) = dout[i * e + c] * inv;
        }
    }
    return da;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    if (x.shape() != dy.shape()) throw DimensionError("relu gradient shape mismatch");
    Tensor dx(x.shape(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
    return dx;
}

DropoutResult dropout(const Tensor& x, double rate, bool train, std::mt19937_64& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    if (!train || rate == 0.0) return {x, Tensor{}};
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DropoutResult r{Tensor(x.shape(), 0.0), Tensor(x.shape(), 0.0)};
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.mask[i] = u(rng) < keep ? scale : 0.0;
        r.out[i] = x[i] * r.mask[i];
    }
    return r;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& dy) {
    if (mask.empty()) return dy;
    Tensor dx(dy.shape(), 0.0);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask[i];
    return dx;
}

BatchNorm::BatchNorm(std::size_t features)
    : gamma(Tensor({features}, 1.0)),
      beta(Tensor({features}, 0.0)),
      running_mean({features}, 0.0),
      running_var({features}, 1.0) {}

Tensor batchnorm_forward(BatchNorm& bn, const Tensor& x, bool train, BatchNormCache& cache, bool update_running) {
    require_rank(x, 2, "batchnorm");
    const std::size_t b = x.dim(0), f = x.dim(1);
    if (f != bn.features()) {
        throw DimensionError("batchnorm has " + std::to_string(bn.features()) + " features, input " + shape_string(x.shape()));
    }
    cache.train = train;
    cache.xhat = Tensor(x.shape(), 0.0);
    cache.inv_std.assign(f, 0.0);
    Tensor y(x.shape(), 0.0);
    for (std::size_t c = 0; c < f; ++c) {
        double mean, var;
        if (train) {
            mean = 0.0;
            for (std::size_t i = 0; i < b; ++i) mean += x.at(i, c);
            mean /= static_cast<double>(b);
            var = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                const double d = x.at(i, c) - mean;
                var += d * d;
            }
            var /= static_cast<double>(b);
            if (update_running) {
                bn.running_mean[c] = bn.momentum * bn.running_mean[c] + (1.0 - bn.momentum) * mean;
                bn.running_var[c] = bn.momentum * bn.running_var[c] + (1.0 - bn.momentum) * var;
            }
        } else {
            mean = bn.running_mean[c];
            var = bn.running_var[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + bn.eps);
        cache.inv_std[c] = inv_std;
        const double g = bn.gamma.value[c], be = bn.beta.value[c];
        for (std::size_t i = 0; i < b; ++i) {
            const double xh = (x.at(i, c) - mean) * inv_std;
            cache.xhat.at(i, c) = xh;
            y.at(i, c) = g * xh + be;
        }
    }
    return y;
}

Tensor batchnorm_backward(BatchNorm& bn, const BatchNormCache& cache, const Tensor& dy) {
    const std::size_t b = dy.dim(0), f = dy.dim(1);
    if (dy.shape() != cache.xhat.shape()) throw DimensionError("batchnorm upstream gradient shape mismatch");
    Tensor dx(dy.shape(), 0.0);
    const double n = static_cast<double>(b);
    for (std::size_t c = 0; c < f; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            sum_dy += dy.at(i, c);
            sum_dy_xhat += dy.at(i, c) * cache.xhat.at(i, c);
        }
        bn.beta.grad[c] += sum_dy;
        bn.gamma.grad[c] += sum_dy_xhat;
        const double g = bn.gamma.value[c];
        const double inv_std = cache.inv_std[c];
        if (cache.train) {
            // dx = g * inv_std / n * (n * dy - sum(dy) - xhat * sum(dy * xhat))
            const double scale = g * inv_std / n;
            for (std::size_t i = 0; i < b; ++i) {
                dx.at(i, c) = scale * (n * dy.at(i, c) - sum_dy - cache.xhat.at(i, c) * sum_dy_xhat);
            }
        } else {
            for (std::size_t i = 0; i < b; ++i) dx.at(i, c) = g * inv_std * dy.at(i, c);
        }
    }
    return dx;
}

Dense::Dense(std::size_t in, std::size_t out) : weight(Tensor({in, out}, 0.0)), bias(Tensor({out}, 0.0)) {}

Tensor dense_forward(const Dense& layer, const Tensor& x) {
    require_rank(x, 2, "dense");
    if (x.dim(1) != layer.in_features()) {
        throw DimensionError("dense expects " + std::to_string(layer.in_features()) + " inputs, got " +
                             shape_string(x.shape()));
    }
    const std::size_t b = x.dim(0), out = layer.out_features();
    Tensor y({b, out}, 0.0);
    for (std::size_t i = 0; i < b; ++i) std::copy_n(layer.bias.value.raw(), out, y.raw() + i * out);
    kernels::active<double>().gemm(x.raw(), layer.weight.value.raw(), y.raw(), b, layer.in_features(), out);
    return y;
}

Tensor dense_backward(Dense& layer, const Tensor& x, const Tensor& dy) {
    const std::size_t b = x.dim(0), in = layer.in_features(), out = layer.out_features();
    if (dy.shape() != Shape{b, out}) throw DimensionError("dense upstream gradient has shape " + shape_string(dy.shape()));
    const auto& k = kernels::active<double>();
    Tensor dx({b, in}, 0.0);
    const double* w = layer.weight.value.raw();
    double* dw = layer.weight.grad.raw();
    for (std::size_t i = 0; i < b; ++i) {
        const double* dyi = dy.raw() + i * out;
        k.add(dyi, layer.bias.grad.raw(), out);
        for (std::size_t r = 0; r < in; ++r) {
            dx[i * in + r] = k.dot(dyi, w + r * out, out);
            k.axpy(x[i * in + r], dyi, dw + r * out, out);
        }
    }
    return dx;
}

Tensor softmax(const Tensor& logits) {
    require_rank(logits, 2, "softmax");
    const std::size_t b = logits.dim(0), c = logits.dim(1);
    Tensor p(logits.shape(), 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        const double* z = logits.raw() + i * c;
        double* pi = p.raw() + i * c;
        const double mx = *std::max_element(z, z + c);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            pi[j] = std::exp(z[j] - mx);
            sum += pi[j];
        }
        for (std::size_t j = 0; j < c; ++j) pi[j] /= sum;
    }
    return p;
}

SoftmaxXent softmax_cross_entropy(const Tensor& logits, std::span<const std::int64_t> labels) {
    require_rank(logits, 2, "softmax_cross_entropy");
    const std::size_t b = logits.dim(0), c = logits.dim(1);
    if (labels.size() != b) throw DimensionError("expected " + std::to_string(b) + " labels, got " + std::to_string(labels.size()));
    SoftmaxXent r;
    r.probs = softmax(logits);
    r.dlogits = r.probs;
    const double inv_b = 1.0 / static_cast<double>(b);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const auto y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c) throw IndexError("label outside [0, " + std::to_string(c) + ")", y);
        // log-sum-exp form keeps the loss finite when the label probability underflows.
        const double* z = logits.raw() + i * c;
        const double mx = *std::max_element(z, z + c);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
        loss += std::log(sum) + mx - z[y];
        r.dlogits[i * c + static_cast<std::size_t>(y)] -= 1.0;
    }
    for (auto& g : r.dlogits.data()) g *= inv_b;
    r.loss = loss * inv_b;
    return r;
}

}  // namespace memcom::ops
