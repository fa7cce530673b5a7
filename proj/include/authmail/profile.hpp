#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "authmail/char_cnn.hpp"
#include "authmail/dataset.hpp"
#include "authmail/error.hpp"
#include "authmail/naive_bayes.hpp"

namespace authmail {

inline constexpr int kDefaultRetrainThreshold = 50;

struct FeedbackItem {
    enum class ReportedAs { FalsePositive, FalseNegative };
    std::string email_id;
    ReportedAs reported_as = ReportedAs::FalsePositive;
    std::optional<int> verified_label;          // 0/1 once a human confirmed
    std::optional<bool> classifier_was_wrong;   // set at ingest time
    std::optional<std::string> email_text;      // kept so retraining can use it
};

inline const char* to_string(FeedbackItem::ReportedAs r) {
    return r == FeedbackItem::ReportedAs::FalsePositive ? "false_positive" : "false_negative";
}

inline std::optional<FeedbackItem::ReportedAs> reported_as_from_string(std::string_view s) {
    if (s == "false_positive") return FeedbackItem::ReportedAs::FalsePositive;
    if (s == "false_negative") return FeedbackItem::ReportedAs::FalseNegative;
    return std::nullopt;
}

struct Verdict {
    enum class Label { Inauthentic, Authentic, Abstain };
    Label label = Label::Abstain;
    std::optional<double> cnn_score;
    std::optional<int> nb_label;
    std::string aggregation;
};

inline const char* to_string(Verdict::Label l) {
    switch (l) {
        case Verdict::Label::Inauthentic: return "inauthentic";
        case Verdict::Label::Authentic: return "authentic";
        case Verdict::Label::Abstain: return "abstain";
    }
    return "?";
}

inline std::optional<Verdict::Label> verdict_label_from_string(std::string_view s) {
    if (s == "inauthentic" || s == "0") return Verdict::Label::Inauthentic;
    if (s == "authentic" || s == "1") return Verdict::Label::Authentic;
    if (s == "abstain") return Verdict::Label::Abstain;
    return std::nullopt;
}

inline const std::vector<std::string>& aggregation_rules() {
    static const std::vector<std::string> rules{"cnn-only", "nb-only", "conservative-and",
                                               "weighted"};
    return rules;
}

struct SenderProfile {
    std::string sender_id;
    std::optional<std::string> cnn_model_ref;  // file name inside the profile dir
    std::optional<std::string> nb_model_ref;
    std::int64_t trained_at = 0;  // unix seconds, 0 = never trained
    std::vector<EmailRecord> pending_batch;    // new sent mail awaiting retrain
    std::vector<FeedbackItem> feedback_queue;
    int retrain_threshold = kDefaultRetrainThreshold;
    std::string aggregation = "cnn-only";
    double weight_cnn = 1.0;
    double weight_nb = 1.0;
};

/// Sent mail is authentic by construction, so queued records are normalized
/// to label 1 regardless of what the caller handed in.
inline void add_pending(SenderProfile& p, std::vector<EmailRecord> records) {
    for (auto& r : records) {
        r.label = 1;
        r.source = Source::Authentic1;
        p.pending_batch.push_back(std::move(r));
    }
}

/// Marks the item against the verdict the user is disputing and queues it.
/// Only a verified label that contradicts a committed verdict counts as a
/// classifier mistake; an abstention made no claim, so it is never "wrong".
inline void ingest_feedback(SenderProfile& p, FeedbackItem item, const Verdict& original) {
    if (item.verified_label) {
        if (*item.verified_label != 0 && *item.verified_label != 1)
            throw std::invalid_argument("ingest_feedback: verified label must be 0 or 1");
        const bool committed = original.label != Verdict::Label::Abstain;
        const int verdict_label = original.label == Verdict::Label::Authentic ? 1 : 0;
        item.classifier_was_wrong = committed && *item.verified_label != verdict_label;
    } else {
        item.classifier_was_wrong.reset();  // held unverified; never trains
    }
    p.feedback_queue.push_back(std::move(item));
}

inline std::size_t verified_wrong_count(const SenderProfile& p) {
    std::size_t n = 0;
    for (const auto& f : p.feedback_queue)
        if (f.verified_label && f.classifier_was_wrong && *f.classifier_was_wrong) ++n;
    return n;
}

inline bool retrain_due(const SenderProfile& p) {
    return p.pending_batch.size() + verified_wrong_count(p) >=
           static_cast<std::size_t>(p.retrain_threshold);
}

/// Everything the next retrain may train on: queued sent mail plus feedback
/// emails that were verified and genuinely misclassified. Unverified or
/// correctly-classified feedback never appears here.
inline std::vector<EmailRecord> retrain_manifest(const SenderProfile& p) {
    std::vector<EmailRecord> out = p.pending_batch;
    for (const auto& f : p.feedback_queue) {
        if (!f.verified_label || !f.classifier_was_wrong || !*f.classifier_was_wrong) continue;
        if (!f.email_text) continue;  // nothing to train on without the text
        EmailRecord r;
        r.id = f.email_id;
        r.text = *f.email_text;
        r.label = *f.verified_label;
        r.source = r.label == 1 ? Source::Authentic2 : Source::External;
        out.push_back(std::move(r));
    }
    return out;
}

/// Drops material consumed by a retrain; unverified and correctly-classified
/// feedback stays behind as a log.
inline void clear_retrain_material(SenderProfile& p) {
    p.pending_batch.clear();
    std::erase_if(p.feedback_queue, [](const FeedbackItem& f) {
        return f.verified_label && f.classifier_was_wrong && *f.classifier_was_wrong;
    });
}

// ---------------------------------------------------------------------------
// persistence: <registry>/<sender>/{profile.json, cnn.model, nb.model,
//              pending.jsonl, feedback.jsonl}

namespace detail {

inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write: " + tmp.string());
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!f) throw DataError("failed writing: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline nlohmann::json feedback_to_json(const FeedbackItem& f) {
    nlohmann::json j;
    j["email_id"] = f.email_id;
    j["reported_as"] = to_string(f.reported_as);
    j["verified_label"] = f.verified_label ? nlohmann::json(*f.verified_label) : nullptr;
    j["classifier_was_wrong"] =
        f.classifier_was_wrong ? nlohmann::json(*f.classifier_was_wrong) : nullptr;
    j["email_text"] = f.email_text ? nlohmann::json(*f.email_text) : nullptr;
    return j;
}

inline FeedbackItem feedback_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("email_id") || !j["email_id"].is_string())
        throw DataError(where + ": malformed feedback entry");
    FeedbackItem f;
    f.email_id = j["email_id"].get<std::string>();
    const auto ra = reported_as_from_string(j.value("reported_as", ""));
    if (!ra) throw DataError(where + ": unknown reported_as");
    f.reported_as = *ra;
    if (j.contains("verified_label") && j["verified_label"].is_number_integer())
        f.verified_label = j["verified_label"].get<int>();
    if (j.contains("classifier_was_wrong") && j["classifier_was_wrong"].is_boolean())
        f.classifier_was_wrong = j["classifier_was_wrong"].get<bool>();
    if (j.contains("email_text") && j["email_text"].is_string())
        f.email_text = j["email_text"].get<std::string>();
    return f;
}

}  // namespace detail

class ProfileRegistry {
public:
    explicit ProfileRegistry(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path dir(const std::string& sender_id) const { return root_ / sender_id; }

    bool exists(const std::string& sender_id) const {
        return std::filesystem::exists(dir(sender_id) / "profile.json");
    }

    SenderProfile register_sender(const std::string& sender_id) {
        if (sender_id.empty() || sender_id.find('/') != std::string::npos ||
            sender_id.find("..") != std::string::npos)
            throw DataError("invalid sender id '" + sender_id + "'");
        if (exists(sender_id)) throw DataError("sender '" + sender_id + "' already registered");
        std::filesystem::create_directories(dir(sender_id));
        SenderProfile p;
        p.sender_id = sender_id;
        save(p);
        return p;
    }

    SenderProfile load(const std::string& sender_id) const {
        const auto d = dir(sender_id);
        std::ifstream f(d / "profile.json", std::ios::binary);
        if (!f) throw DataError("sender '" + sender_id + "' is not registered");
        nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
        if (j.is_discarded()) throw DataError((d / "profile.json").string() + ": malformed JSON");

        SenderProfile p;
        p.sender_id = j.value("sender_id", sender_id);
        if (j.contains("cnn_model") && j["cnn_model"].is_string())
            p.cnn_model_ref = j["cnn_model"].get<std::string>();
        if (j.contains("nb_model") && j["nb_model"].is_string())
            p.nb_model_ref = j["nb_model"].get<std::string>();
        p.trained_at = j.value("trained_at", std::int64_t{0});
        p.retrain_threshold = j.value("retrain_threshold", kDefaultRetrainThreshold);
        p.aggregation = j.value("aggregation", std::string("cnn-only"));
        p.weight_cnn = j.value("weight_cnn", 1.0);
        p.weight_nb = j.value("weight_nb", 1.0);

        if (std::filesystem::exists(d / "pending.jsonl"))
            p.pending_batch = load_manifest(d / "pending.jsonl");
        const auto fq = d / "feedback.jsonl";
        if (std::filesystem::exists(fq)) {
            std::ifstream ff(fq, std::ios::binary);
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(ff, line)) {
                ++lineno;
                if (line.empty()) continue;
                const std::string where = fq.string() + ":" + std::to_string(lineno);
                nlohmann::json l = nlohmann::json::parse(line, nullptr, false);
                if (l.is_discarded()) throw DataError(where + ": malformed JSON");
                p.feedback_queue.push_back(detail::feedback_from_json(l, where));
            }
        }
        return p;
    }

    /// Persists metadata and queues. Every file is written temp-then-rename,
    /// so a crash never leaves a half-written profile behind.
    void save(const SenderProfile& p) const {
        const auto d = dir(p.sender_id);
        std::filesystem::create_directories(d);

        nlohmann::json j;
        j["sender_id"] = p.sender_id;
        j["cnn_model"] = p.cnn_model_ref ? nlohmann::json(*p.cnn_model_ref) : nullptr;
        j["nb_model"] = p.nb_model_ref ? nlohmann::json(*p.nb_model_ref) : nullptr;
        j["trained_at"] = p.trained_at;
        j["retrain_threshold"] = p.retrain_threshold;
        j["aggregation"] = p.aggregation;
        j["weight_cnn"] = p.weight_cnn;
        j["weight_nb"] = p.weight_nb;
        detail::write_file_atomic(d / "profile.json", j.dump(2) + "\n");

        std::ostringstream pending;
        save_manifest(p.pending_batch, pending);
        detail::write_file_atomic(d / "pending.jsonl", pending.str());

        std::ostringstream fb;
        for (const auto& f : p.feedback_queue) fb << detail::feedback_to_json(f).dump() << '\n';
        detail::write_file_atomic(d / "feedback.jsonl", fb.str());
    }

    /// Writes the model next to the profile and swaps the reference in one
    /// rename, so concurrent scoring never reads a partial file.
    void attach_cnn(SenderProfile& p, const nn::CharCNN<float>& model) const {
        const auto d = dir(p.sender_id);
        std::filesystem::create_directories(d);
        const auto tmp = d / "cnn.model.tmp";
        nn::save_cnn_model(model, tmp);
        std::filesystem::rename(tmp, d / "cnn.model");
        p.cnn_model_ref = "cnn.model";
    }

    void attach_nb(SenderProfile& p, const NBModel& model) const {
        const auto d = dir(p.sender_id);
        std::filesystem::create_directories(d);
        const auto tmp = d / "nb.model.tmp";
        save_nb_model(model, tmp);
        std::filesystem::rename(tmp, d / "nb.model");
        p.nb_model_ref = "nb.model";
    }

private:
    std::filesystem::path root_;
};

/// Folds per-model signals through a named rule. A missing model simply
/// drops out of the rule; with no signals at all every rule abstains.
inline Verdict aggregate_signals(std::optional<double> cnn_score, std::optional<int> cnn_label,
                                 std::optional<int> nb_label, const std::string& rule,
                                 double weight_cnn = 1.0, double weight_nb = 1.0) {
    const auto& known = aggregation_rules();
    if (std::find(known.begin(), known.end(), rule) == known.end())
        throw std::invalid_argument("unknown aggregation rule '" + rule + "'");

    Verdict v;
    v.aggregation = rule;
    v.cnn_score = cnn_score;
    v.nb_label = nb_label;

    const auto as_label = [](int l) {
        return l == 1 ? Verdict::Label::Authentic : Verdict::Label::Inauthentic;
    };
    if (!cnn_label && !nb_label) {
        v.label = Verdict::Label::Abstain;  // no trained model: the only abstain case
    } else if (rule == "cnn-only") {
        v.label = as_label(cnn_label ? *cnn_label : *nb_label);
    } else if (rule == "nb-only") {
        v.label = as_label(nb_label ? *nb_label : *cnn_label);
    } else if (rule == "conservative-and") {
        const bool all_authentic = (!cnn_label || *cnn_label == 1) && (!nb_label || *nb_label == 1);
        v.label = as_label(all_authentic ? 1 : 0);
    } else {  // weighted
        double z = 0.0;
        if (cnn_score) z += weight_cnn * (*cnn_score - 0.5);
        if (nb_label) z += weight_nb * (*nb_label - 0.5);
        v.label = as_label(z >= 0.0 ? 1 : 0);
    }
    return v;
}

/// Runs whichever models the profile has and folds their signals through the
/// profile's aggregation rule. Scoring never mutates the profile.
inline Verdict score_email(const ProfileRegistry& registry, const SenderProfile& p,
                           const std::string& email_text, const std::string& rule_override = "") {
    const std::string rule = rule_override.empty() ? p.aggregation : rule_override;

    std::optional<double> cnn_score;
    std::optional<int> cnn_label, nb_label;
    if (p.cnn_model_ref) {
        const auto path = registry.dir(p.sender_id) / *p.cnn_model_ref;
        try {
            const auto model = nn::load_cnn_model(path);
            cnn_score = nn::predict_scores(model, {email_text}).at(0);
            cnn_label = nn::predict_label(*cnn_score, model.hyper.threshold);
        } catch (const DataError& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
    if (p.nb_model_ref) {
        const auto path = registry.dir(p.sender_id) / *p.nb_model_ref;
        try {
            nb_label = predict(load_nb_model(path), email_text).label;
        } catch (const DataError& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
    return aggregate_signals(cnn_score, cnn_label, nb_label, rule, p.weight_cnn, p.weight_nb);
}

}  // namespace authmail
