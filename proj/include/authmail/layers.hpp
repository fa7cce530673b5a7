#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "authmail/rng.hpp"
#include "authmail/tensor.hpp"

namespace authmail::nn {

enum class Mode { Train, Eval };

/// A batch of index sequences, shape [B x L] flattened row-major.
struct IndexBatch {
    std::vector<std::int32_t> idx;
    std::size_t B = 0;
    std::size_t L = 0;

    void validate() const {
        if (idx.size() != B * L || B == 0 || L == 0)
            throw std::invalid_argument("IndexBatch: index count does not match B x L");
    }
};

namespace detail {

/// Dot product with bounded 32-bit partials: each lane folds at most
/// kChunk/kLanes terms in float before the chunk is flushed into the 64-bit
/// total. For double inputs the whole sum stays in double.
template <typename R>
double dot_accum(const R* a, const R* b, std::size_t n) {
    if constexpr (std::is_same_v<R, float>) {
        constexpr std::size_t kLanes = 16, kChunk = 1024, kBlock = 64;
        double total = 0.0;
        std::size_t i = 0;
        while (i < n) {
            const std::size_t end = std::min(n, i + kChunk);
            float lane[kLanes] = {};
            std::size_t j = i;
            // constant-trip inner blocks keep the lanes in registers
            for (; j + kBlock <= end; j += kBlock)
                for (std::size_t o = 0; o < kBlock; o += kLanes)
                    for (std::size_t l = 0; l < kLanes; ++l)
                        lane[l] += a[j + o + l] * b[j + o + l];
            for (; j + kLanes <= end; j += kLanes)
                for (std::size_t l = 0; l < kLanes; ++l) lane[l] += a[j + l] * b[j + l];
            double part = 0.0;
            for (std::size_t l = 0; l < kLanes; ++l) part += lane[l];
            for (; j < end; ++j) part += static_cast<double>(a[j]) * static_cast<double>(b[j]);
            total += part;
            i = end;
        }
        return total;
    } else {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            total += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        return total;
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// embedding

/// Looks up each index and lays rows out channel-major, i.e. the result is
/// already permuted to [B x d x L] for the convolution stage.
template <typename R>
Tensor<R> embedding_forward(const Tensor<R>& table, const IndexBatch& x) {
    require_rank(table, 2, "embedding table");
    x.validate();
    const std::size_t V = table.dim(0), d = table.dim(1);
    Tensor<R> out({x.B, d, x.L});
    for (std::size_t b = 0; b < x.B; ++b)
        for (std::size_t t = 0; t < x.L; ++t) {
            const std::int32_t id = x.idx[b * x.L + t];
            if (id < 0 || static_cast<std::size_t>(id) >= V)
                throw std::out_of_range("embedding: index " + std::to_string(id) +
                                        " outside [0, " + std::to_string(V) + ")");
            const R* row = table.v.data() + static_cast<std::size_t>(id) * d;
            R* col = out.v.data() + (b * d) * x.L + t;
            for (std::size_t c = 0; c < d; ++c) col[c * x.L] = row[c];
        }
    return out;
}

template <typename R>
void embedding_backward(Tensor<R>& table, const IndexBatch& x, const Tensor<R>& d_out) {
    const std::size_t d = table.dim(1);
    require_shape(d_out, {x.B, d, x.L}, "embedding backward");
    for (std::size_t b = 0; b < x.B; ++b)
        for (std::size_t t = 0; t < x.L; ++t) {
            const auto id = static_cast<std::size_t>(x.idx[b * x.L + t]);
            R* grow = table.g.data() + id * d;
            const R* col = d_out.v.data() + (b * d) * x.L + t;
            for (std::size_t c = 0; c < d; ++c) grow[c] += col[c * x.L];
        }
}

// ---------------------------------------------------------------------------
// 1-D convolution, stride 1, no padding

/// out[b,f,t] = bias[f] + sum_{c,j} in[b,c,t+j] * w[f,c,j], t in [0, L-k].
template <typename R>
Tensor<R> conv1d_forward(const Tensor<R>& in, const Tensor<R>& w, const Tensor<R>& bias) {
    require_rank(in, 3, "conv input");
    require_rank(w, 3, "conv weight");
    const std::size_t B = in.dim(0), C = in.dim(1), L = in.dim(2);
    const std::size_t F = w.dim(0), k = w.dim(2);
    if (w.dim(1) != C)
        throw std::invalid_argument("conv: weight channels " + std::to_string(w.dim(1)) +
                                    " do not match input channels " + std::to_string(C));
    require_shape(bias, {F}, "conv bias");
    if (L < k) throw std::invalid_argument("conv: sequence shorter than kernel");
    const std::size_t Lo = L - k + 1;

    Tensor<R> out({B, F, Lo});
    std::vector<double> acc(Lo);
    // Rows are widened to double once per batch item, not once per tap: the
    // conversion is exact, so this only removes work from the hot loop.
    std::vector<double> rows(C * L);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const R* src = in.v.data() + (b * C + c) * L;
            double* dst = rows.data() + c * L;
            for (std::size_t t = 0; t < L; ++t) dst[t] = static_cast<double>(src[t]);
        }
        for (std::size_t f = 0; f < F; ++f) {
            std::fill(acc.begin(), acc.end(), static_cast<double>(bias.v[f]));
            for (std::size_t c = 0; c < C; ++c) {
                const double* row = rows.data() + c * L;
                const R* wr = w.v.data() + (f * C + c) * k;
                for (std::size_t j = 0; j < k; ++j) {
                    const double wv = wr[j];
                    const double* src = row + j;
                    for (std::size_t t = 0; t < Lo; ++t) acc[t] += wv * src[t];
                }
            }
            R* dst = out.v.data() + (b * F + f) * Lo;
            for (std::size_t t = 0; t < Lo; ++t) dst[t] = static_cast<R>(acc[t]);
        }
    }
    return out;
}

/// Accumulates weight/bias gradients (64-bit batch accumulation) and returns
/// the input gradient unless `need_dinput` is false (first layer).
template <typename R>
Tensor<R> conv1d_backward(const Tensor<R>& in, Tensor<R>& w, Tensor<R>& bias,
                          const Tensor<R>& d_out, bool need_dinput = true) {
    const std::size_t B = in.dim(0), C = in.dim(1), L = in.dim(2);
    const std::size_t F = w.dim(0), k = w.dim(2), Lo = L - k + 1;
    require_shape(d_out, {B, F, Lo}, "conv backward");

    std::vector<double> dw(F * C * k, 0.0), db(F, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t f = 0; f < F; ++f) {
            const R* gout = d_out.v.data() + (b * F + f) * Lo;
            double s = 0.0;
            for (std::size_t t = 0; t < Lo; ++t) s += gout[t];
            db[f] += s;
            for (std::size_t c = 0; c < C; ++c) {
                const R* row = in.v.data() + (b * C + c) * L;
                for (std::size_t j = 0; j < k; ++j)
                    dw[(f * C + c) * k + j] += detail::dot_accum(gout, row + j, Lo);
            }
        }
    for (std::size_t i = 0; i < dw.size(); ++i) w.g[i] += static_cast<R>(dw[i]);
    for (std::size_t f = 0; f < F; ++f) bias.g[f] += static_cast<R>(db[f]);

    Tensor<R> din;
    if (need_dinput) {
        din = Tensor<R>({B, C, L});
        std::vector<double> acc(L);
        std::vector<double> gouts(F * Lo);  // widened once per batch item, exact
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t f = 0; f < F; ++f) {
                const R* src = d_out.v.data() + (b * F + f) * Lo;
                double* dst = gouts.data() + f * Lo;
                for (std::size_t t = 0; t < Lo; ++t) dst[t] = static_cast<double>(src[t]);
            }
            for (std::size_t c = 0; c < C; ++c) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (std::size_t f = 0; f < F; ++f) {
                    const double* gout = gouts.data() + f * Lo;
                    const R* wr = w.v.data() + (f * C + c) * k;
                    for (std::size_t j = 0; j < k; ++j) {
                        const double wv = wr[j];
                        double* dst = acc.data() + j;
                        for (std::size_t t = 0; t < Lo; ++t) dst[t] += wv * gout[t];
                    }
                }
                R* out = din.v.data() + (b * C + c) * L;
                for (std::size_t t = 0; t < L; ++t) out[t] = static_cast<R>(acc[t]);
            }
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename R>
Tensor<R> relu_forward(const Tensor<R>& in) {
    Tensor<R> out(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i) out.v[i] = in.v[i] > R(0) ? in.v[i] : R(0);
    return out;
}

/// The mask is recovered from the forward output (out > 0 iff in > 0).
template <typename R>
Tensor<R> relu_backward(const Tensor<R>& out, const Tensor<R>& d_out) {
    Tensor<R> din(out.shape);
    for (std::size_t i = 0; i < out.size(); ++i) din.v[i] = out.v[i] > R(0) ? d_out.v[i] : R(0);
    return din;
}

// ---------------------------------------------------------------------------
// batch normalization over [B x F x L'], statistics per channel f

struct BNCache {
    std::vector<double> mean, invstd;
};

inline constexpr double kBNEps = 1e-5;
inline constexpr double kBNMomentum = 0.1;

/// Train mode normalizes with biased batch statistics over batch x length and
/// nudges the running stats (variance stored unbiased, the usual inference
/// convention). Eval mode uses the running stats as-is; before any training
/// update those are the initial mean 0 / var 1, which is by design.
template <typename R>
Tensor<R> batchnorm1d_forward(const Tensor<R>& in, const Tensor<R>& gamma, const Tensor<R>& beta,
                              Tensor<R>& run_mean, Tensor<R>& run_var, Mode mode,
                              BNCache* cache = nullptr, double eps = kBNEps,
                              double momentum = kBNMomentum) {
    require_rank(in, 3, "batchnorm input");
    const std::size_t B = in.dim(0), F = in.dim(1), Lp = in.dim(2);
    require_shape(gamma, {F}, "batchnorm gamma");
    const std::size_t N = B * Lp;

    Tensor<R> out(in.shape);
    if (mode == Mode::Eval) {
        for (std::size_t f = 0; f < F; ++f) {
            const double m = run_mean.v[f];
            const double s = 1.0 / std::sqrt(static_cast<double>(run_var.v[f]) + eps);
            const double g = gamma.v[f], bt = beta.v[f];
            for (std::size_t b = 0; b < B; ++b) {
                const R* src = in.v.data() + (b * F + f) * Lp;
                R* dst = out.v.data() + (b * F + f) * Lp;
                for (std::size_t t = 0; t < Lp; ++t)
                    dst[t] = static_cast<R>(g * ((src[t] - m) * s) + bt);
            }
        }
        return out;
    }

    if (N < 2) throw std::invalid_argument("batchnorm: train mode needs batch x length >= 2");
    if (cache) {
        cache->mean.assign(F, 0.0);
        cache->invstd.assign(F, 0.0);
    }
    for (std::size_t f = 0; f < F; ++f) {
        double sum = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const R* src = in.v.data() + (b * F + f) * Lp;
            for (std::size_t t = 0; t < Lp; ++t) sum += src[t];
        }
        const double mean = sum / static_cast<double>(N);
        double sq = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const R* src = in.v.data() + (b * F + f) * Lp;
            for (std::size_t t = 0; t < Lp; ++t) {
                const double d = src[t] - mean;
                sq += d * d;
            }
        }
        const double var = sq / static_cast<double>(N);
        const double invstd = 1.0 / std::sqrt(var + eps);
        const double g = gamma.v[f], bt = beta.v[f];
        for (std::size_t b = 0; b < B; ++b) {
            const R* src = in.v.data() + (b * F + f) * Lp;
            R* dst = out.v.data() + (b * F + f) * Lp;
            for (std::size_t t = 0; t < Lp; ++t)
                dst[t] = static_cast<R>(g * ((src[t] - mean) * invstd) + bt);
        }
        const double unbiased = sq / static_cast<double>(N - 1);
        run_mean.v[f] = static_cast<R>((1.0 - momentum) * run_mean.v[f] + momentum * mean);
        run_var.v[f] = static_cast<R>((1.0 - momentum) * run_var.v[f] + momentum * unbiased);
        if (cache) {
            cache->mean[f] = mean;
            cache->invstd[f] = invstd;
        }
    }
    return out;
}

template <typename R>
Tensor<R> batchnorm1d_backward(const Tensor<R>& in, Tensor<R>& gamma, Tensor<R>& beta,
                               const BNCache& cache, const Tensor<R>& d_out) {
    const std::size_t B = in.dim(0), F = in.dim(1), Lp = in.dim(2);
    require_shape(d_out, {B, F, Lp}, "batchnorm backward");
    const double N = static_cast<double>(B * Lp);

    Tensor<R> din(in.shape);
    for (std::size_t f = 0; f < F; ++f) {
        const double mean = cache.mean[f], invstd = cache.invstd[f];
        double s0 = 0.0, s1 = 0.0;  // sum(dout), sum(dout * xhat)
        for (std::size_t b = 0; b < B; ++b) {
            const R* x = in.v.data() + (b * F + f) * Lp;
            const R* go = d_out.v.data() + (b * F + f) * Lp;
            for (std::size_t t = 0; t < Lp; ++t) {
                s0 += go[t];
                s1 += static_cast<double>(go[t]) * ((x[t] - mean) * invstd);
            }
        }
        beta.g[f] += static_cast<R>(s0);
        gamma.g[f] += static_cast<R>(s1);
        const double g = gamma.v[f];
        const double c0 = s0 / N, c1 = s1 / N;
        for (std::size_t b = 0; b < B; ++b) {
            const R* x = in.v.data() + (b * F + f) * Lp;
            const R* go = d_out.v.data() + (b * F + f) * Lp;
            R* dst = din.v.data() + (b * F + f) * Lp;
            for (std::size_t t = 0; t < Lp; ++t) {
                const double xhat = (x[t] - mean) * invstd;
                dst[t] = static_cast<R>(g * invstd * (go[t] - c0 - xhat * c1));
            }
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// global max pooling over the sequence dimension

template <typename R>
Tensor<R> global_max_pool(const Tensor<R>& in, std::vector<std::uint32_t>* argmax = nullptr) {
    require_rank(in, 3, "max pool input");
    const std::size_t B = in.dim(0), F = in.dim(1), Lp = in.dim(2);
    if (Lp == 0) throw std::invalid_argument("max pool: empty sequence dimension");
    Tensor<R> out({B, F});
    if (argmax) argmax->assign(B * F, 0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t f = 0; f < F; ++f) {
            const R* src = in.v.data() + (b * F + f) * Lp;
            std::size_t best = 0;
            for (std::size_t t = 1; t < Lp; ++t)
                if (src[t] > src[best]) best = t;
            out.v[b * F + f] = src[best];
            if (argmax) (*argmax)[b * F + f] = static_cast<std::uint32_t>(best);
        }
    return out;
}

template <typename R>
Tensor<R> global_max_pool_backward(const std::vector<std::uint32_t>& argmax,
                                   const std::vector<std::size_t>& in_shape,
                                   const Tensor<R>& d_out) {
    const std::size_t B = in_shape[0], F = in_shape[1], Lp = in_shape[2];
    require_shape(d_out, {B, F}, "max pool backward");
    Tensor<R> din(in_shape);
    for (std::size_t i = 0; i < B * F; ++i) din.v[i * Lp + argmax[i]] = d_out.v[i];
    return din;
}

// ---------------------------------------------------------------------------
// dropout (inverted scaling: eval needs no rescale)

template <typename R>
Tensor<R> dropout_forward(const Tensor<R>& in, double p, std::uint64_t seed,
                          std::vector<std::uint8_t>& mask) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0,1)");
    mask.assign(in.size(), 1);
    Tensor<R> out(in.shape);
    std::mt19937_64 rng(seed);
    const R scale = static_cast<R>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (next_uniform(rng) < p) {
            mask[i] = 0;
            out.v[i] = R(0);
        } else {
            out.v[i] = in.v[i] * scale;
        }
    }
    return out;
}

template <typename R>
Tensor<R> dropout_backward(const std::vector<std::uint8_t>& mask, double p,
                           const Tensor<R>& d_out) {
    Tensor<R> din(d_out.shape);
    const R scale = static_cast<R>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < d_out.size(); ++i)
        din.v[i] = mask[i] ? d_out.v[i] * scale : R(0);
    return din;
}

// ---------------------------------------------------------------------------
// affine (fully connected): [B x D] x [D x O] + [O]

template <typename R>
Tensor<R> affine_forward(const Tensor<R>& in, const Tensor<R>& w, const Tensor<R>& bias) {
    require_rank(in, 2, "affine input");
    const std::size_t B = in.dim(0), D = in.dim(1);
    require_rank(w, 2, "affine weight");
    if (w.dim(0) != D) throw std::invalid_argument("affine: weight rows do not match input width");
    const std::size_t O = w.dim(1);
    require_shape(bias, {O}, "affine bias");

    Tensor<R> out({B, O});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < O; ++o) {
            double acc = bias.v[o];
            const R* row = in.v.data() + b * D;
            for (std::size_t d = 0; d < D; ++d) acc += static_cast<double>(row[d]) * w.v[d * O + o];
            out.v[b * O + o] = static_cast<R>(acc);
        }
    return out;
}

template <typename R>
Tensor<R> affine_backward(const Tensor<R>& in, Tensor<R>& w, Tensor<R>& bias,
                          const Tensor<R>& d_out) {
    const std::size_t B = in.dim(0), D = in.dim(1), O = w.dim(1);
    require_shape(d_out, {B, O}, "affine backward");

    std::vector<double> dw(D * O, 0.0), db(O, 0.0);
    Tensor<R> din({B, D});
    for (std::size_t b = 0; b < B; ++b) {
        const R* row = in.v.data() + b * D;
        const R* go = d_out.v.data() + b * O;
        for (std::size_t o = 0; o < O; ++o) {
            db[o] += go[o];
            for (std::size_t d = 0; d < D; ++d) dw[d * O + o] += static_cast<double>(row[d]) * go[o];
        }
        R* dst = din.v.data() + b * D;
        for (std::size_t d = 0; d < D; ++d) {
            double acc = 0.0;
            for (std::size_t o = 0; o < O; ++o) acc += static_cast<double>(go[o]) * w.v[d * O + o];
            dst[d] = static_cast<R>(acc);
        }
    }
    for (std::size_t i = 0; i < dw.size(); ++i) w.g[i] += static_cast<R>(dw[i]);
    for (std::size_t o = 0; o < O; ++o) bias.g[o] += static_cast<R>(db[o]);
    return din;
}

// ---------------------------------------------------------------------------
// sigmoid head and binary cross-entropy

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Mean of -[y log yhat + (1-y) log(1-yhat)] over the batch; probabilities
/// are nudged off exact 0/1 so the loss stays finite.
template <typename R>
double bce_loss(const std::vector<R>& y_hat, const std::vector<int>& y) {
    if (y_hat.size() != y.size() || y_hat.empty())
        throw std::invalid_argument("bce_loss: size mismatch");
    constexpr double lo = 1e-12;
    double total = 0.0;
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        const double p = std::min(1.0 - lo, std::max(lo, static_cast<double>(y_hat[i])));
        total += y[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(y_hat.size());
}

/// Same loss evaluated from pre-sigmoid values in the log-sum-exp-stable
/// form max(z,0) - z*y + log(1+exp(-|z|)); optionally emits d(loss)/dz.
template <typename R>
double bce_with_logits(const Tensor<R>& z, const std::vector<int>& y, Tensor<R>* dz = nullptr) {
    const std::size_t B = z.dim(0);
    if (y.size() != B) throw std::invalid_argument("bce_with_logits: label count mismatch");
    if (dz) *dz = Tensor<R>(z.shape);
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        const double zb = z.v[b];
        total += std::max(zb, 0.0) - zb * y[b] + std::log1p(std::exp(-std::abs(zb)));
        if (dz) dz->v[b] = static_cast<R>((sigmoid(zb) - y[b]) / static_cast<double>(B));
    }
    return total / static_cast<double>(B);
}

/// Score at or above the threshold reads as authentic.
inline int predict_label(double y_hat, double threshold = 0.5) {
    return y_hat >= threshold ? 1 : 0;
}

}  // namespace authmail::nn
