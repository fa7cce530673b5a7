#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "authmail/char_cnn.hpp"
#include "authmail/dataset.hpp"
#include "authmail/encoding.hpp"
#include "authmail/error.hpp"
#include "authmail/rng.hpp"

namespace authmail::nn {

struct TrainConfig {
    std::size_t batch_size = 32;
    int max_epochs = 100;
    double learning_rate = 1e-3;
    int patience = 10;
    double val_fraction = 0.1;
    std::uint64_t seed = kDefaultSeed;

    void validate() const {
        if (batch_size < 2)
            throw std::invalid_argument("batch size must be at least 2 (batch norm)");
        if (!(val_fraction > 0.0 && val_fraction < 1.0))
            throw std::invalid_argument("validation fraction must be in (0,1)");
        if (max_epochs < 1) throw std::invalid_argument("max epochs must be positive");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
        if (patience < 1) throw std::invalid_argument("patience must be positive");
    }
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    bool stopped_early = false;
    int epochs_run = 0;
    int best_epoch = 0;  // 1-based epoch with the lowest validation loss
};

/// Adaptive moment estimation with the standard decay constants. Slot order
/// follows the model's fixed trainable traversal.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(CharCNN<float>& model) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        std::size_t slot = 0;
        model.for_each_trainable([&](Tensor<float>& p) {
            if (slot >= m_.size()) {
                m_.emplace_back(p.size(), 0.0f);
                v_.emplace_back(p.size(), 0.0f);
            }
            auto& m = m_[slot];
            auto& v = v_[slot];
            for (std::size_t i = 0; i < p.size(); ++i) {
                const float g = p.g[i];
                m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * g);
                v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * double(g) * double(g));
                const double mhat = m[i] / bc1, vhat = v[i] / bc2;
                p.v[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
            ++slot;
        });
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

namespace detail {

struct EncodedSet {
    std::vector<std::int32_t> idx;  // n x L
    std::vector<int> labels;
    std::size_t n = 0, L = 0;

    IndexBatch gather(const std::vector<std::size_t>& rows, std::size_t lo,
                      std::size_t hi) const {
        IndexBatch b;
        b.B = hi - lo;
        b.L = L;
        b.idx.reserve(b.B * L);
        for (std::size_t r = lo; r < hi; ++r)
            b.idx.insert(b.idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(rows[r] * L),
                         idx.begin() + static_cast<std::ptrdiff_t>((rows[r] + 1) * L));
        return b;
    }

    std::vector<int> gather_labels(const std::vector<std::size_t>& rows, std::size_t lo,
                                   std::size_t hi) const {
        std::vector<int> y;
        y.reserve(hi - lo);
        for (std::size_t r = lo; r < hi; ++r) y.push_back(labels[rows[r]]);
        return y;
    }
};

inline double mean_eval_loss(CharCNN<float>& model, const EncodedSet& set,
                             const std::vector<std::size_t>& rows, std::size_t batch_size) {
    double total = 0.0;
    for (std::size_t lo = 0; lo < rows.size(); lo += batch_size) {
        const std::size_t hi = std::min(rows.size(), lo + batch_size);
        ForwardTrace<float> tr;
        model_forward(model, set.gather(rows, lo, hi), Mode::Eval, 0, &tr);
        total += bce_with_logits(tr.z, set.gather_labels(rows, lo, hi)) *
                 static_cast<double>(hi - lo);
    }
    return total / static_cast<double>(rows.size());
}

}  // namespace detail

/// Trains on the split's train ids only. A seeded val_fraction slice is held
/// out for early stopping (strict-improvement rule, best weights restored).
/// Batches are seeded shuffles; a trailing batch of one row merges into its
/// predecessor so batch norm always sees at least two rows.
inline std::pair<CharCNN<float>, TrainHistory> train_char_cnn(
    CharCNN<float> model, const std::vector<EmailRecord>& records, const SplitAssignment& split,
    const TrainConfig& cfg, std::ostream* progress = nullptr) {
    cfg.validate();
    if (split.train_ids.empty()) throw DataError("train: empty training set");

    std::unordered_map<std::string, const EmailRecord*> by_id;
    for (const auto& r : records) by_id.emplace(r.id, &r);
    std::vector<const EmailRecord*> train;
    train.reserve(split.train_ids.size());
    for (const auto& id : split.train_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("train: split id '" + id + "' not in records");
        train.push_back(it->second);
    }
    const std::size_t n = train.size();
    if (n < 2 * cfg.batch_size)
        throw DataError("train: " + std::to_string(n) +
                        " training emails is fewer than twice the batch size (" +
                        std::to_string(cfg.batch_size) + "); use a smaller --batch-size");

    // Holdout basis is the id-sorted order, so record order never matters.
    std::sort(train.begin(), train.end(),
              [](const EmailRecord* a, const EmailRecord* b) { return a->id < b->id; });

    detail::EncodedSet set;
    set.n = n;
    set.L = model.hyper.seq_len;
    set.idx.reserve(n * set.L);
    for (const auto* r : train) {
        const auto seq = encode_chars(r->text, set.L);
        set.idx.insert(set.idx.end(), seq.indices.begin(), seq.indices.end());
        set.labels.push_back(r->label);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 val_rng(derive_seed(cfg.seed, 1));
    deterministic_shuffle(order, val_rng);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(n) + 1e-9)));
    std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> fit_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    if (fit_rows.size() < 2) throw DataError("train: too few emails left after validation holdout");

    Adam opt(cfg.learning_rate);
    TrainHistory hist;
    CharCNN<float> best = model;
    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::mt19937_64 epoch_rng(derive_seed(cfg.seed, (2ull << 32) + static_cast<std::uint64_t>(epoch)));
        deterministic_shuffle(fit_rows, epoch_rng);

        // batch boundaries: full batches, remainder of 1 folded into the last
        std::vector<std::size_t> bounds;
        for (std::size_t lo = 0; lo < fit_rows.size(); lo += cfg.batch_size) bounds.push_back(lo);
        bounds.push_back(fit_rows.size());
        if (bounds.size() >= 3 && bounds[bounds.size() - 1] - bounds[bounds.size() - 2] < 2)
            bounds.erase(bounds.end() - 2);

        double loss_sum = 0.0;
        for (std::size_t bi = 0; bi + 1 < bounds.size(); ++bi) {
            const std::size_t lo = bounds[bi], hi = bounds[bi + 1];
            zero_grad(model);
            ForwardTrace<float> tr;
            const std::uint64_t drop_seed = derive_seed(
                cfg.seed, (3ull << 32) + (static_cast<std::uint64_t>(epoch) << 20) + bi);
            model_forward(model, set.gather(fit_rows, lo, hi), Mode::Train, drop_seed, &tr);
            const double loss = model_backward(model, tr, set.gather_labels(fit_rows, lo, hi));
            opt.step(model);
            loss_sum += loss * static_cast<double>(hi - lo);
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(fit_rows.size()));
        hist.val_loss.push_back(detail::mean_eval_loss(model, set, val_rows, cfg.batch_size));
        hist.epochs_run = epoch;
        if (progress)
            *progress << "epoch " << epoch << ": train loss " << hist.train_loss.back()
                      << ", val loss " << hist.val_loss.back() << '\n';

        if (hist.val_loss.back() < best_val) {
            best_val = hist.val_loss.back();
            hist.best_epoch = epoch;
            best = model;
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.patience) {
            hist.stopped_early = true;
            break;
        }
    }
    return {std::move(best), std::move(hist)};
}

}  // namespace authmail::nn
