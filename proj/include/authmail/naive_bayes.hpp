#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "authmail/dataset.hpp"
#include "authmail/encoding.hpp"
#include "authmail/error.hpp"

namespace authmail {

/// Two-class multinomial model over word counts. Class 1 = authentic.
struct NBModel {
    double alpha = 1.0;
    std::array<double, 2> log_prior{};                    // sums to 1 after exp
    std::vector<std::string> vocab;                       // sorted, from training set
    std::vector<std::array<double, 2>> log_likelihood;    // parallel to vocab

    // Raw training counts, kept so knife-edge label decisions can be made in
    // integer arithmetic (ties must break to 0 even when float rounding says
    // otherwise). Not serialized; empty on models loaded from disk, which
    // fall back to the float comparison.
    std::vector<std::array<std::int64_t, 2>> counts;      // parallel to vocab
    std::array<std::int64_t, 2> token_total{0, 0};
    std::array<std::int64_t, 2> doc_total{0, 0};

    bool has_exact_counts() const {
        return !vocab.empty() && counts.size() == vocab.size();
    }

    std::size_t vocab_index(std::string_view w) const {
        auto it = std::lower_bound(vocab.begin(), vocab.end(), w);
        if (it == vocab.end() || *it != w) return vocab.size();
        return static_cast<std::size_t>(it - vocab.begin());
    }
};

inline NBModel fit(const std::vector<WordBag>& docs, const std::vector<int>& labels,
                   double alpha = 1.0) {
    if (docs.size() != labels.size()) throw std::invalid_argument("fit: size mismatch");
    if (alpha < 0.0) throw std::invalid_argument("fit: negative smoothing");
    std::array<std::int64_t, 2> ndocs{0, 0};
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("fit: labels must be 0 or 1");
        ++ndocs[static_cast<std::size_t>(y)];
    }
    if (ndocs[0] == 0 || ndocs[1] == 0)
        throw DataError("fit: training data must contain both classes");

    std::map<std::string, std::array<std::int64_t, 2>> counts;
    std::array<std::int64_t, 2> total{0, 0};
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        for (const auto& [w, n] : docs[i]) {
            counts[w][c] += n;
            total[c] += n;
        }
    }

    NBModel m;
    m.alpha = alpha;
    m.log_prior = {std::log(static_cast<double>(ndocs[0]) / static_cast<double>(docs.size())),
                   std::log(static_cast<double>(ndocs[1]) / static_cast<double>(docs.size()))};
    m.doc_total = ndocs;
    m.token_total = total;
    m.vocab.reserve(counts.size());
    m.log_likelihood.reserve(counts.size());
    m.counts.reserve(counts.size());
    const auto vsize = static_cast<double>(counts.size());
    for (const auto& [w, per_class] : counts) {
        m.vocab.push_back(w);
        m.counts.push_back(per_class);
        std::array<double, 2> ll;
        for (std::size_t c = 0; c < 2; ++c) {
            // (count + α) / (total + α·|vocab|); α=0 leaves unseen words at
            // probability zero, i.e. a -inf log-likelihood (literal MLE).
            const double num = static_cast<double>(per_class[c]) + alpha;
            const double den = static_cast<double>(total[c]) + alpha * vsize;
            ll[c] = num > 0.0 ? std::log(num / den) : -std::numeric_limits<double>::infinity();
        }
        m.log_likelihood.push_back(ll);
    }
    return m;
}

inline NBModel fit(const std::vector<EmailRecord>& records, double alpha = 1.0) {
    std::vector<WordBag> docs;
    std::vector<int> labels;
    docs.reserve(records.size());
    labels.reserve(records.size());
    for (const auto& r : records) {
        docs.push_back(tokenize_words(r.text));
        labels.push_back(r.label);
    }
    return fit(docs, labels, alpha);
}

struct NBPrediction {
    int label = 0;
    std::array<double, 2> log_posterior{};  // unnormalized
};

namespace detail {

// Label decision in integer arithmetic, for integral α and a model that still
// carries its training counts: both unnormalized posteriors are ratios of
// products of small integers, so cross-multiplying compares them exactly.
// Knife-edge corpora can tie exactly while the float log-sums differ by an
// ulp in either direction; the tie must break to 0 regardless. Returns -1
// when α is fractional or the products would overflow (caller falls back to
// the float comparison, which is only ever wrong within rounding error of a
// genuine tie).
inline int exact_label(const NBModel& m, const WordBag& doc) {
    if (!(m.alpha >= 0.0) || m.alpha != std::floor(m.alpha) || m.alpha > 1e9) return -1;
    const auto alpha = static_cast<std::int64_t>(m.alpha);
    using u128 = unsigned __int128;
    constexpr u128 kLimit = u128(1) << 63;  // keeps the final cross products below 2^126

    u128 num[2], den[2];
    for (int c = 0; c < 2; ++c) {
        num[c] = static_cast<u128>(m.doc_total[c]);
        den[c] = static_cast<u128>(m.doc_total[0] + m.doc_total[1]);
    }
    const auto V = static_cast<std::int64_t>(m.vocab.size());
    for (const auto& [w, n] : doc) {
        const std::size_t i = m.vocab_index(w);
        if (i == m.vocab.size()) continue;
        if (n < 0 || n > 128) return -1;
        for (int c = 0; c < 2; ++c) {
            const auto fn = static_cast<u128>(m.counts[i][c] + alpha);
            const auto fd = static_cast<u128>(m.token_total[c] + alpha * V);
            for (std::int64_t k = 0; k < n; ++k) {
                num[c] *= fn;
                den[c] *= fd;
                if (num[c] >= kLimit || den[c] >= kLimit) return -1;
            }
        }
    }
    return num[1] * den[0] > num[0] * den[1] ? 1 : 0;
}

}  // namespace detail

inline NBPrediction predict(const NBModel& model, const WordBag& doc) {
    NBPrediction p;
    p.log_posterior = model.log_prior;
    for (const auto& [w, n] : doc) {
        const std::size_t i = model.vocab_index(w);
        if (i == model.vocab.size()) continue;  // unseen at training time: skip
        for (std::size_t c = 0; c < 2; ++c)
            p.log_posterior[c] += static_cast<double>(n) * model.log_likelihood[i][c];
    }
    if (model.has_exact_counts()) {
        const int exact = detail::exact_label(model, doc);
        if (exact >= 0) {
            p.label = exact;
            return p;
        }
    }
    // ties (including -inf vs -inf) resolve to inauthentic
    p.label = p.log_posterior[1] > p.log_posterior[0] ? 1 : 0;
    return p;
}

inline NBPrediction predict(const NBModel& model, std::string_view text) {
    return predict(model, tokenize_words(text));
}

/// Normalized P(class 1 | doc) from the two unnormalized log-posteriors.
/// Both -inf (possible under α=0) means the model has no opinion: 0.5.
inline double posterior_positive(const std::array<double, 2>& lp) {
    const bool inf0 = std::isinf(lp[0]) && lp[0] < 0, inf1 = std::isinf(lp[1]) && lp[1] < 0;
    if (inf0 && inf1) return 0.5;
    if (inf1) return 0.0;
    if (inf0) return 1.0;
    return 1.0 / (1.0 + std::exp(lp[0] - lp[1]));
}

struct WordScore {
    std::string word;
    double score = 0.0;
};

/// Words ranked by |log P(w|1) − log P(w|0)|, ties broken lexicographically.
inline std::vector<WordScore> top_discriminative_words(const NBModel& model, int k) {
    if (k <= 0) return {};
    std::vector<WordScore> all;
    all.reserve(model.vocab.size());
    for (std::size_t i = 0; i < model.vocab.size(); ++i) {
        const auto& ll = model.log_likelihood[i];
        double s = std::abs(ll[1] - ll[0]);
        if (std::isnan(s)) s = std::numeric_limits<double>::infinity();  // -inf vs -inf
        all.push_back({model.vocab[i], s});
    }
    std::sort(all.begin(), all.end(), [](const WordScore& a, const WordScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.word < b.word;
    });
    if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
    return all;
}

namespace detail {

inline std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_g17(const std::string& tok, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw DataError(where + ": bad number '" + tok + "'");
    return v;
}

}  // namespace detail

inline constexpr const char* kNBModelMagic = "AMNB";
inline constexpr int kNBModelVersion = 1;

/// Versioned text format: header with smoothing and class priors, then one
/// line per vocabulary word with both log-likelihoods. All reals carry 17
/// significant digits, so save/load/save is byte-identical.
inline void save_nb_model(const NBModel& m, std::ostream& os) {
    os << kNBModelMagic << ' ' << kNBModelVersion << '\n';
    os << "alpha " << detail::g17(m.alpha) << " log_prior " << detail::g17(m.log_prior[0]) << ' '
       << detail::g17(m.log_prior[1]) << " words " << m.vocab.size() << '\n';
    for (std::size_t i = 0; i < m.vocab.size(); ++i)
        os << m.vocab[i] << ' ' << detail::g17(m.log_likelihood[i][0]) << ' '
           << detail::g17(m.log_likelihood[i][1]) << '\n';
}

inline void save_nb_model(const NBModel& m, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write model: " + path.string());
    save_nb_model(m, f);
}

inline NBModel load_nb_model(std::istream& is, const std::string& name) {
    const auto fail = [&](const std::string& what) -> DataError {
        return DataError(name + ": " + what);
    };
    std::string magic;
    int version = -1;
    if (!(is >> magic >> version) || magic != kNBModelMagic) throw fail("not a text model file");
    if (version != kNBModelVersion)
        throw fail("unsupported version " + std::to_string(version));

    NBModel m;
    std::string kw, a, p0, p1;
    std::size_t nwords = 0;
    if (!(is >> kw >> a) || kw != "alpha") throw fail("missing alpha");
    m.alpha = detail::parse_g17(a, name);
    if (!(is >> kw >> p0 >> p1) || kw != "log_prior") throw fail("missing log_prior");
    m.log_prior = {detail::parse_g17(p0, name), detail::parse_g17(p1, name)};
    if (!(is >> kw >> nwords) || kw != "words") throw fail("missing word count");

    m.vocab.reserve(nwords);
    m.log_likelihood.reserve(nwords);
    for (std::size_t i = 0; i < nwords; ++i) {
        std::string w, l0, l1;
        if (!(is >> w >> l0 >> l1)) throw fail("truncated at word " + std::to_string(i));
        if (!m.vocab.empty() && !(m.vocab.back() < w)) throw fail("vocabulary not sorted");
        m.vocab.push_back(std::move(w));
        m.log_likelihood.push_back({detail::parse_g17(l0, name), detail::parse_g17(l1, name)});
    }
    return m;
}

inline NBModel load_nb_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read model: " + path.string());
    return load_nb_model(f, path.filename().string());
}

}  // namespace authmail
