#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "authmail/encoding.hpp"
#include "authmail/error.hpp"
#include "authmail/layers.hpp"
#include "authmail/rng.hpp"
#include "authmail/tensor.hpp"

namespace authmail::nn {

struct CharCNNHyper {
    std::uint32_t vocab = kCharVocabSize;
    std::uint32_t embed_dim = 16;
    std::uint32_t filters = 64;
    std::vector<std::uint32_t> kernels{7, 5, 3};
    std::uint32_t seq_len = kDefaultSeqLen;
    float dropout_p = 0.5f;
    float threshold = 0.5f;

    std::size_t concat_width() const { return kernels.size() * filters; }

    std::int64_t trainable_parameters() const {
        std::int64_t n = std::int64_t(vocab) * embed_dim;                     // embedding
        for (auto k : kernels) n += std::int64_t(embed_dim) * k * filters + filters;
        n += std::int64_t(kernels.size()) * 2 * filters;                      // gamma, beta
        n += std::int64_t(concat_width()) * 1 + 1;                            // head
        return n;
    }

    void validate() const {
        if (vocab < 1 || embed_dim < 1 || filters < 1 || seq_len < 1 || kernels.empty())
            throw std::invalid_argument("model hyperparameters must be positive");
        for (auto k : kernels)
            if (k < 1 || k > seq_len)
                throw std::invalid_argument("kernel size must lie in [1, sequence length]");
        if (!(dropout_p >= 0.0f && dropout_p < 1.0f))
            throw std::invalid_argument("dropout probability must be in [0,1)");
    }
};

/// Branch-parallel character CNN: embedding -> three valid 1-D convolutions
/// (ReLU, batch norm, global max pool) -> concat -> dropout -> affine ->
/// sigmoid. Default geometry has 17,665 trainable parameters.
template <typename R>
struct CharCNN {
    CharCNNHyper hyper;
    Tensor<R> embedding;  // [V x d]
    struct Branch {
        Tensor<R> conv_w, conv_b;    // [F x d x k], [F]
        Tensor<R> bn_gamma, bn_beta; // [F]
        Tensor<R> bn_mean, bn_var;   // running stats, not trainable
    };
    std::vector<Branch> branches;
    Tensor<R> fc_w, fc_b;  // [D x 1], [1]

    /// Fixed visiting order; optimizer state and the file format rely on it.
    template <typename Fn>
    void for_each_trainable(Fn&& fn) {
        fn(embedding);
        for (auto& br : branches) {
            fn(br.conv_w);
            fn(br.conv_b);
            fn(br.bn_gamma);
            fn(br.bn_beta);
        }
        fn(fc_w);
        fn(fc_b);
    }
    template <typename Fn>
    void for_each_trainable(Fn&& fn) const {
        const_cast<CharCNN*>(this)->for_each_trainable(
            [&](const Tensor<R>& t) { fn(t); });
    }
};

template <typename R>
std::int64_t count_parameters(const CharCNN<R>& model) {
    std::int64_t n = 0;
    model.for_each_trainable([&](const Tensor<R>& t) { n += static_cast<std::int64_t>(t.size()); });
    return n;
}

template <typename R>
void zero_grad(CharCNN<R>& model) {
    model.for_each_trainable([](Tensor<R>& t) { t.zero_grad(); });
}

/// Fan-in-scaled uniform init for conv/affine, uniform(-0.05, 0.05) for the
/// embedding, identity batch norm. Weight draw order is fixed, so a seed
/// pins every initial value.
template <typename R>
CharCNN<R> make_char_cnn(const CharCNNHyper& hyper, std::uint64_t seed) {
    hyper.validate();
    CharCNN<R> m;
    m.hyper = hyper;
    std::mt19937_64 rng(seed);
    const auto V = hyper.vocab, d = hyper.embed_dim, F = hyper.filters;

    m.embedding = Tensor<R>({V, d}, true);
    for (auto& w : m.embedding.v) w = static_cast<R>(next_uniform(rng, -0.05, 0.05));

    for (auto k : hyper.kernels) {
        typename CharCNN<R>::Branch br;
        const double bound = 1.0 / std::sqrt(static_cast<double>(d) * k);
        br.conv_w = Tensor<R>({F, d, k}, true);
        for (auto& w : br.conv_w.v) w = static_cast<R>(next_uniform(rng, -bound, bound));
        br.conv_b = Tensor<R>({F}, true);
        for (auto& w : br.conv_b.v) w = static_cast<R>(next_uniform(rng, -bound, bound));
        br.bn_gamma = Tensor<R>({F}, true);
        std::fill(br.bn_gamma.v.begin(), br.bn_gamma.v.end(), R(1));
        br.bn_beta = Tensor<R>({F}, true);
        br.bn_mean = Tensor<R>({F});
        br.bn_var = Tensor<R>({F});
        std::fill(br.bn_var.v.begin(), br.bn_var.v.end(), R(1));
        m.branches.push_back(std::move(br));
    }

    const std::size_t D = hyper.concat_width();
    const double bound = 1.0 / std::sqrt(static_cast<double>(D));
    m.fc_w = Tensor<R>({D, 1}, true);
    for (auto& w : m.fc_w.v) w = static_cast<R>(next_uniform(rng, -bound, bound));
    m.fc_b = Tensor<R>({1}, true);
    m.fc_b.v[0] = static_cast<R>(next_uniform(rng, -bound, bound));
    return m;
}

/// Everything backward needs from a train-mode forward.
template <typename R>
struct ForwardTrace {
    IndexBatch x;
    Mode mode = Mode::Eval;
    bool valid = false;
    Tensor<R> embedded;  // [B x d x L]
    struct BranchTrace {
        Tensor<R> relu_out;  // [B x F x L'] — batch norm input
        BNCache bn;
        std::vector<std::uint32_t> argmax;
    };
    std::vector<BranchTrace> branches;
    std::vector<std::uint8_t> dropout_mask;
    Tensor<R> dropped;  // affine input [B x D]
    Tensor<R> z;        // logits [B x 1]
};

/// Sigmoid outputs are clamped away from exact 0/1 for reporting; the loss
/// path reads the logits off the trace instead.
inline constexpr double kProbClamp = 1e-7;

template <typename R>
Tensor<R> model_forward(CharCNN<R>& model, const IndexBatch& x, Mode mode,
                        std::uint64_t rng_seed = 0, ForwardTrace<R>* trace = nullptr) {
    x.validate();
    if (x.L != model.hyper.seq_len)
        throw std::invalid_argument("model_forward: sequence length " + std::to_string(x.L) +
                                    " does not match model (" +
                                    std::to_string(model.hyper.seq_len) + ")");
    const std::size_t B = x.B, F = model.hyper.filters, D = model.hyper.concat_width();

    Tensor<R> embedded = embedding_forward(model.embedding, x);
    Tensor<R> concat({B, D});
    if (trace) {
        trace->x = x;
        trace->mode = mode;
        trace->branches.assign(model.branches.size(), {});
    }
    for (std::size_t i = 0; i < model.branches.size(); ++i) {
        auto& br = model.branches[i];
        Tensor<R> conv = conv1d_forward(embedded, br.conv_w, br.conv_b);
        Tensor<R> relu = relu_forward(conv);
        BNCache bn_cache;
        Tensor<R> bn = batchnorm1d_forward(relu, br.bn_gamma, br.bn_beta, br.bn_mean, br.bn_var,
                                           mode, mode == Mode::Train ? &bn_cache : nullptr);
        std::vector<std::uint32_t> argmax;
        Tensor<R> pooled = global_max_pool(bn, trace ? &argmax : nullptr);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t f = 0; f < F; ++f) concat.v[b * D + i * F + f] = pooled.v[b * F + f];
        if (trace) {
            trace->branches[i].relu_out = std::move(relu);
            trace->branches[i].bn = std::move(bn_cache);
            trace->branches[i].argmax = std::move(argmax);
        }
    }

    Tensor<R> head_in;
    std::vector<std::uint8_t> mask;
    if (mode == Mode::Train)
        head_in = dropout_forward(concat, model.hyper.dropout_p, rng_seed, mask);
    else
        head_in = std::move(concat);

    Tensor<R> z = affine_forward(head_in, model.fc_w, model.fc_b);
    Tensor<R> y_hat({B, 1});
    for (std::size_t b = 0; b < B; ++b) {
        const double p = sigmoid(static_cast<double>(z.v[b]));
        y_hat.v[b] = static_cast<R>(std::min(1.0 - kProbClamp, std::max(kProbClamp, p)));
    }

    if (trace) {
        trace->embedded = std::move(embedded);
        trace->dropout_mask = std::move(mask);
        trace->dropped = std::move(head_in);
        trace->z = std::move(z);
        trace->valid = true;
    }
    return y_hat;
}

/// Eval is a pure function of (weights, input); the const_cast is safe
/// because the eval path never touches the model.
template <typename R>
Tensor<R> model_forward(const CharCNN<R>& model, const IndexBatch& x) {
    return model_forward(const_cast<CharCNN<R>&>(model), x, Mode::Eval, 0,
                         static_cast<ForwardTrace<R>*>(nullptr));
}

/// Accumulates gradients of the mean BCE loss into every trainable tensor
/// and returns the loss. Requires a completed train-mode forward.
template <typename R>
double model_backward(CharCNN<R>& model, const ForwardTrace<R>& trace, const std::vector<int>& y) {
    if (!trace.valid || trace.mode != Mode::Train)
        throw std::logic_error("model_backward: no train-mode forward recorded");
    const std::size_t B = trace.x.B, F = model.hyper.filters, D = model.hyper.concat_width();
    if (y.size() != B) throw std::invalid_argument("model_backward: label count mismatch");

    Tensor<R> dz;
    const double loss = bce_with_logits(trace.z, y, &dz);
    Tensor<R> d_head_in = affine_backward(trace.dropped, model.fc_w, model.fc_b, dz);
    Tensor<R> d_concat = dropout_backward(trace.dropout_mask, model.hyper.dropout_p, d_head_in);

    Tensor<R> d_embedded(trace.embedded.shape);
    for (std::size_t i = 0; i < model.branches.size(); ++i) {
        auto& br = model.branches[i];
        const auto& bt = trace.branches[i];
        const std::size_t Lp = bt.relu_out.dim(2);

        Tensor<R> d_pool({B, F});
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t f = 0; f < F; ++f) d_pool.v[b * F + f] = d_concat.v[b * D + i * F + f];
        Tensor<R> d_bn = global_max_pool_backward(bt.argmax, {B, F, Lp}, d_pool);
        Tensor<R> d_relu = batchnorm1d_backward(bt.relu_out, br.bn_gamma, br.bn_beta, bt.bn, d_bn);
        Tensor<R> d_conv = relu_backward(bt.relu_out, d_relu);
        Tensor<R> d_emb = conv1d_backward(trace.embedded, br.conv_w, br.conv_b, d_conv);
        for (std::size_t j = 0; j < d_embedded.size(); ++j) d_embedded.v[j] += d_emb.v[j];
    }
    embedding_backward(model.embedding, trace.x, d_embedded);
    return loss;
}

/// Batched eval scores for raw texts, one probability per text.
template <typename R>
std::vector<double> predict_scores(const CharCNN<R>& model, const std::vector<std::string>& texts,
                                   std::size_t batch_size = 64) {
    std::vector<double> scores;
    scores.reserve(texts.size());
    const std::size_t L = model.hyper.seq_len;
    for (std::size_t start = 0; start < texts.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, texts.size() - start);
        IndexBatch x;
        x.B = n;
        x.L = L;
        x.idx.reserve(n * L);
        for (std::size_t i = 0; i < n; ++i) {
            const auto seq = encode_chars(texts[start + i], L);
            x.idx.insert(x.idx.end(), seq.indices.begin(), seq.indices.end());
        }
        Tensor<R> y_hat = model_forward(model, x);
        for (std::size_t i = 0; i < n; ++i) scores.push_back(static_cast<double>(y_hat.v[i]));
    }
    return scores;
}

// ---------------------------------------------------------------------------
// binary model file

inline constexpr char kCNNModelMagic[4] = {'A', 'M', 'C', 'N'};
inline constexpr std::uint32_t kCNNModelVersion = 1;

namespace detail {

static_assert(std::numeric_limits<float>::is_iec559, "IEEE-754 float required");

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline std::uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw DataError(std::string("model file truncated at ") + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
    const std::uint64_t lo = get_u32(is, what);
    return lo | (std::uint64_t(get_u32(is, what)) << 32);
}

inline float get_f32(std::istream& is, const char* what) {
    return std::bit_cast<float>(get_u32(is, what));
}

inline void put_tensor(std::ostream& os, const Tensor<float>& t) {
    put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_u64(os, d);
    for (float v : t.v) put_f32(os, v);
}

inline Tensor<float> get_tensor(std::istream& is, const std::vector<std::size_t>& want,
                                bool with_grad, const char* what) {
    const std::uint32_t ndim = get_u32(is, what);
    if (ndim != want.size()) throw DataError(std::string(what) + ": unexpected tensor rank");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(get_u64(is, what));
    if (shape != want)
        throw DataError(std::string(what) + ": unexpected tensor shape " + shape_string(shape) +
                        ", wanted " + shape_string(want));
    Tensor<float> t(shape, with_grad);
    for (auto& v : t.v) v = get_f32(is, what);
    return t;
}

}  // namespace detail

/// Little-endian binary layout: magic, version, hyperparameters, then every
/// tensor (shape + float32 data) in the fixed traversal order, running
/// statistics included.
inline void save_cnn_model(const CharCNN<float>& m, std::ostream& os) {
    os.write(kCNNModelMagic, 4);
    detail::put_u32(os, kCNNModelVersion);
    detail::put_u32(os, m.hyper.vocab);
    detail::put_u32(os, m.hyper.embed_dim);
    detail::put_u32(os, m.hyper.filters);
    detail::put_u32(os, static_cast<std::uint32_t>(m.hyper.kernels.size()));
    for (auto k : m.hyper.kernels) detail::put_u32(os, k);
    detail::put_u32(os, m.hyper.seq_len);
    detail::put_f32(os, m.hyper.dropout_p);
    detail::put_f32(os, m.hyper.threshold);

    detail::put_tensor(os, m.embedding);
    for (const auto& br : m.branches) {
        detail::put_tensor(os, br.conv_w);
        detail::put_tensor(os, br.conv_b);
        detail::put_tensor(os, br.bn_gamma);
        detail::put_tensor(os, br.bn_beta);
        detail::put_tensor(os, br.bn_mean);
        detail::put_tensor(os, br.bn_var);
    }
    detail::put_tensor(os, m.fc_w);
    detail::put_tensor(os, m.fc_b);
}

inline void save_cnn_model(const CharCNN<float>& m, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write model: " + path.string());
    save_cnn_model(m, f);
    if (!f) throw DataError("failed writing model: " + path.string());
}

inline CharCNN<float> load_cnn_model(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCNNModelMagic, 4) != 0)
        throw DataError("not a binary model file");
    const std::uint32_t version = detail::get_u32(is, "version");
    if (version != kCNNModelVersion)
        throw DataError("unsupported model version " + std::to_string(version));

    CharCNNHyper h;
    h.vocab = detail::get_u32(is, "vocab");
    h.embed_dim = detail::get_u32(is, "embed_dim");
    h.filters = detail::get_u32(is, "filters");
    const std::uint32_t nk = detail::get_u32(is, "kernel count");
    if (nk == 0 || nk > 64) throw DataError("implausible kernel count");
    h.kernels.assign(nk, 0);
    for (auto& k : h.kernels) k = detail::get_u32(is, "kernel size");
    h.seq_len = detail::get_u32(is, "seq_len");
    h.dropout_p = detail::get_f32(is, "dropout_p");
    h.threshold = detail::get_f32(is, "threshold");
    try {
        h.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("model hyperparameters invalid: ") + e.what());
    }

    CharCNN<float> m;
    m.hyper = h;
    const std::size_t V = h.vocab, d = h.embed_dim, F = h.filters;
    m.embedding = detail::get_tensor(is, {V, d}, true, "embedding");
    for (auto k : h.kernels) {
        typename CharCNN<float>::Branch br;
        br.conv_w = detail::get_tensor(is, {F, d, k}, true, "conv weight");
        br.conv_b = detail::get_tensor(is, {F}, true, "conv bias");
        br.bn_gamma = detail::get_tensor(is, {F}, true, "bn gamma");
        br.bn_beta = detail::get_tensor(is, {F}, true, "bn beta");
        br.bn_mean = detail::get_tensor(is, {F}, false, "bn running mean");
        br.bn_var = detail::get_tensor(is, {F}, false, "bn running var");
        for (float v : br.bn_var.v)
            if (!(v > 0.0f)) throw DataError("running variance must stay positive");
        m.branches.push_back(std::move(br));
    }
    m.fc_w = detail::get_tensor(is, {h.concat_width(), 1}, true, "head weight");
    m.fc_b = detail::get_tensor(is, {1}, true, "head bias");

    if (count_parameters(m) != h.trainable_parameters())
        throw DataError("model parameter count does not match its hyperparameters");
    return m;
}

inline CharCNN<float> load_cnn_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read model: " + path.string());
    return load_cnn_model(f);
}

}  // namespace authmail::nn
