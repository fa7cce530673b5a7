#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "authmail/error.hpp"

namespace authmail {

struct Confusion {
    std::int64_t tp = 0;  // predicted 1, actual 1
    std::int64_t tn = 0;  // predicted 0, actual 0
    std::int64_t fp = 0;  // predicted 1, actual 0
    std::int64_t fn = 0;  // predicted 0, actual 1

    std::int64_t total() const { return tp + tn + fp + fn; }
};

inline Confusion confusion(const std::vector<int>& actual, const std::vector<int>& predicted) {
    if (predicted.size() != actual.size())
        throw std::invalid_argument("confusion: size mismatch");
    if (predicted.empty()) throw std::invalid_argument("confusion: empty inputs");
    Confusion c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] != 0, a = actual[i] != 0;
        if (p && a) ++c.tp;
        else if (!p && !a) ++c.tn;
        else if (p && !a) ++c.fp;
        else ++c.fn;
    }
    return c;
}

inline double accuracy(const Confusion& c) {
    if (c.total() == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

/// F1 for one class given its own tp/fp/fn; 0 by convention when the
/// denominator vanishes (class absent and never predicted).
inline double f1_one_class(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    const std::int64_t denom = 2 * tp + fp + fn;
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

inline double f1_positive(const Confusion& c) { return f1_one_class(c.tp, c.fp, c.fn); }

/// For the negative class the roles of fp/fn swap.
inline double f1_negative(const Confusion& c) { return f1_one_class(c.tn, c.fn, c.fp); }

inline double macro_f1(const Confusion& c) {
    if (c.total() == 0) throw std::invalid_argument("macro_f1: empty confusion matrix");
    return 0.5 * (f1_positive(c) + f1_negative(c));
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

/// ROC curve over descending score thresholds. Tied scores move to the next
/// point together, so ties are handled without order dependence. The curve is
/// anchored at (0,0) and (1,1).
inline std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                       const std::vector<int>& actual) {
    if (scores.size() != actual.size()) throw std::invalid_argument("roc_curve: size mismatch");
    if (scores.empty()) throw DataError("roc_curve: no samples");
    std::int64_t pos = 0, neg = 0;
    for (int a : actual) (a != 0 ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw DataError("roc_curve: need both classes present, got " + std::to_string(pos) +
                        " positive / " + std::to_string(neg) + " negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> curve;
    curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // consume the whole tie group before emitting a point
        while (i < order.size() && scores[order[i]] == s) {
            (actual[order[i]] != 0 ? tp : fp)++;
            ++i;
        }
        curve.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                         static_cast<double>(tp) / static_cast<double>(pos), s});
    }
    return curve;
}

/// Area under the ROC curve by trapezoidal integration. Equals the
/// probability a random positive outscores a random negative, ties counting
/// half.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& actual) {
    const auto curve = roc_curve(scores, actual);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
    return area;
}

inline void write_roc_csv(const std::vector<RocPoint>& curve, std::ostream& os) {
    os << "fpr,tpr,threshold\n";
    char buf[128];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6g\n", p.fpr, p.tpr, p.threshold);
        os << buf;
    }
}

struct EvalReport {
    Confusion conf;
    std::optional<double> auc;            // only when scores are available
    std::optional<int> epochs_run;        // only for trained-by-epochs models
    std::optional<bool> stopped_early;
};

namespace detail {
inline std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}
}  // namespace detail

/// Plain name/value rows, stable across runs (no timestamps, durations or
/// machine identifiers), so identical evaluations emit identical bytes.
/// Rows that only apply to iteratively trained models print NA otherwise.
inline void write_report(const EvalReport& r, std::ostream& os) {
    os << "Accuracy: " << detail::fixed4(accuracy(r.conf)) << '\n';
    os << "F1 (macro): " << detail::fixed4(macro_f1(r.conf)) << '\n';
    os << "True positives: " << r.conf.tp << '\n';
    os << "True negatives: " << r.conf.tn << '\n';
    os << "False positives: " << r.conf.fp << '\n';
    os << "False negatives: " << r.conf.fn << '\n';
    if (r.auc) os << "AUC: " << detail::fixed4(*r.auc) << '\n';
    os << "# training epochs: ";
    if (r.epochs_run) os << *r.epochs_run << '\n'; else os << "NA\n";
    os << "Training stopped early: ";
    if (r.stopped_early) os << (*r.stopped_early ? "Yes" : "No") << '\n'; else os << "NA\n";
}

}  // namespace authmail
