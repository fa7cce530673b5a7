#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "authmail/error.hpp"
#include "authmail/rng.hpp"

namespace authmail {

/// Fixed published constant so fixtures and reports are stable across runs.
inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr double kDefaultSplitRatio = 0.8;

enum class Source {
    Authentic1,
    Authentic2,
    Inauthentic1,
    Inauthentic2,
    Inauthentic3Bec,
    External,
};

inline const char* to_string(Source s) {
    switch (s) {
        case Source::Authentic1: return "authentic-1";
        case Source::Authentic2: return "authentic-2";
        case Source::Inauthentic1: return "inauthentic-1";
        case Source::Inauthentic2: return "inauthentic-2";
        case Source::Inauthentic3Bec: return "inauthentic-3-bec";
        case Source::External: return "external";
    }
    return "?";
}

inline std::optional<Source> source_from_string(std::string_view s) {
    if (s == "authentic-1") return Source::Authentic1;
    if (s == "authentic-2") return Source::Authentic2;
    if (s == "inauthentic-1") return Source::Inauthentic1;
    if (s == "inauthentic-2") return Source::Inauthentic2;
    if (s == "inauthentic-3-bec") return Source::Inauthentic3Bec;
    if (s == "external") return Source::External;
    return std::nullopt;
}

inline bool is_authentic_source(Source s) {
    return s == Source::Authentic1 || s == Source::Authentic2;
}

struct EmailRecord {
    std::string id;
    std::string text;  // "Subject: ...\n" + body
    int label = 0;     // 1 = authentic, 0 = inauthentic
    Source source = Source::External;
};

enum class Recipe { Dataset1, Dataset2, Dataset3, Dataset4, Custom };

inline const char* to_string(Recipe r) {
    switch (r) {
        case Recipe::Dataset1: return "dataset-1";
        case Recipe::Dataset2: return "dataset-2";
        case Recipe::Dataset3: return "dataset-3";
        case Recipe::Dataset4: return "dataset-4";
        case Recipe::Custom: return "custom";
    }
    return "?";
}

inline std::optional<Recipe> recipe_from_string(std::string_view s) {
    if (s == "dataset-1") return Recipe::Dataset1;
    if (s == "dataset-2") return Recipe::Dataset2;
    if (s == "dataset-3") return Recipe::Dataset3;
    if (s == "dataset-4") return Recipe::Dataset4;
    if (s == "custom") return Recipe::Custom;
    return std::nullopt;
}

struct LabeledDataset {
    std::vector<EmailRecord> records;
    Recipe recipe = Recipe::Custom;
};

struct SplitAssignment {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = kDefaultSeed;
    double ratio = kDefaultSplitRatio;
};

/// Concatenates authentic and inauthentic records into one dataset. Record
/// counts for the named recipes are checked against the reference set sizes;
/// a mismatch warns rather than fails, since equivalently sized sets are not
/// always available.
inline LabeledDataset assemble(const std::vector<EmailRecord>& authentic,
                               const std::vector<EmailRecord>& inauthentic,
                               Recipe recipe,
                               std::ostream& warn = std::cerr) {
    for (const auto& r : authentic)
        if (r.label != 1)
            throw DataError("assemble: authentic record '" + r.id + "' has label " +
                            std::to_string(r.label));
    for (const auto& r : inauthentic)
        if (r.label != 0)
            throw DataError("assemble: inauthentic record '" + r.id + "' has label " +
                            std::to_string(r.label));

    LabeledDataset ds;
    ds.recipe = recipe;
    ds.records.reserve(authentic.size() + inauthentic.size());
    std::unordered_set<std::string> seen;
    for (const auto* side : {&authentic, &inauthentic})
        for (const auto& r : *side) {
            if (!seen.insert(r.id).second)
                throw DataError("assemble: duplicate record id '" + r.id + "'");
            ds.records.push_back(r);
        }

    struct Expected { std::size_t a, i; };
    std::optional<Expected> want;
    switch (recipe) {
        case Recipe::Dataset1:
        case Recipe::Dataset2: want = Expected{369, 369}; break;
        case Recipe::Dataset3:
        case Recipe::Dataset4: want = Expected{369, 1017}; break;
        case Recipe::Custom: break;
    }
    if (want && (authentic.size() != want->a || inauthentic.size() != want->i))
        warn << "warning: " << to_string(recipe) << " expects " << want->a << " authentic + "
             << want->i << " inauthentic records, got " << authentic.size() << " + "
             << inauthentic.size() << "\n";
    return ds;
}

/// Deterministic train/test partition: a seeded permutation of the id-sorted
/// record list, identical across runs and platforms for the same
/// (ids, ratio, seed). File order never matters.
inline SplitAssignment split(const LabeledDataset& dataset,
                             double ratio = kDefaultSplitRatio,
                             std::uint64_t seed = kDefaultSeed) {
    if (dataset.records.empty()) throw DataError("split: empty dataset");
    if (!(ratio > 0.0 && ratio <= 1.0))
        throw std::invalid_argument("split: ratio must be in (0, 1]");

    std::vector<std::string> ids;
    ids.reserve(dataset.records.size());
    for (const auto& r : dataset.records) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());

    std::mt19937_64 rng(seed);
    deterministic_shuffle(ids, rng);

    // Nudge before floor so ratios like 0.7 * 10 do not land on 6.999...
    const auto n_train = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(ids.size()) + 1e-9));

    SplitAssignment sa;
    sa.seed = seed;
    sa.ratio = ratio;
    sa.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    sa.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    return sa;
}

namespace detail {

inline nlohmann::json record_to_json(const EmailRecord& r) {
    // nlohmann keeps keys sorted, which makes manifests byte-stable.
    nlohmann::json j;
    j["id"] = r.id;
    j["label"] = r.label;
    j["source"] = to_string(r.source);
    j["text"] = r.text;
    return j;
}

inline EmailRecord record_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw DataError(where + ": record is not a JSON object");
    EmailRecord r;
    if (!j.contains("text") || !j["text"].is_string())
        throw DataError(where + ": missing text field");
    r.text = j["text"].get<std::string>();
    if (!j.contains("id") || !j["id"].is_string())
        throw DataError(where + ": missing id field");
    r.id = j["id"].get<std::string>();
    if (!j.contains("label") || !j["label"].is_number_integer())
        throw DataError(where + ": missing label field");
    r.label = j["label"].get<int>();
    if (r.label != 0 && r.label != 1) throw DataError(where + ": label must be 0 or 1");
    if (!j.contains("source") || !j["source"].is_string())
        throw DataError(where + ": missing source field");
    const auto src = source_from_string(j["source"].get<std::string>());
    if (!src) throw DataError(where + ": unknown source '" + j["source"].get<std::string>() + "'");
    r.source = *src;
    if ((r.label == 1) != is_authentic_source(r.source))
        throw DataError(where + ": label " + std::to_string(r.label) +
                        " inconsistent with source " + to_string(r.source));
    return r;
}

}  // namespace detail

/// Writes records as UTF-8 JSON Lines with keys id, label, source, text.
inline void save_manifest(const std::vector<EmailRecord>& records, std::ostream& os) {
    for (const auto& r : records) os << detail::record_to_json(r).dump() << '\n';
}

inline void save_manifest(const std::vector<EmailRecord>& records,
                          const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write manifest: " + path.string());
    save_manifest(records, f);
}

inline std::vector<EmailRecord> load_manifest(std::istream& is, const std::string& name) {
    std::vector<EmailRecord> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError(where + ": malformed JSON");
        EmailRecord r = detail::record_from_json(j, where);
        if (!seen.insert(r.id).second) throw DataError(where + ": duplicate id '" + r.id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<EmailRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read manifest: " + path.string());
    return load_manifest(f, path.filename().string());
}

/// Imports pre-generated inauthentic emails (LLM variants, third-party BEC
/// samples). Every record comes out labeled 0 with the given source; ids are
/// synthesized from the file name when absent.
inline std::vector<EmailRecord> import_external(const std::filesystem::path& path, Source source) {
    if (is_authentic_source(source))
        throw std::invalid_argument("import_external: source must be an inauthentic set");
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read file: " + path.string());

    const std::string name = path.filename().string();
    std::vector<EmailRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError(where + ": malformed JSON");
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
            throw DataError(where + ": missing text field");
        EmailRecord r;
        r.text = j["text"].get<std::string>();
        r.id = (j.contains("id") && j["id"].is_string())
                   ? j["id"].get<std::string>()
                   : name + ":" + std::to_string(lineno);
        r.label = 0;
        r.source = source;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace authmail
