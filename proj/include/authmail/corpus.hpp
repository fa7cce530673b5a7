#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "authmail/error.hpp"

namespace authmail {

// Cleaned emails longer than this are kept but flagged; the reference corpus
// never exceeds it.
inline constexpr std::size_t kCharLenWarnLimit = 5120;

struct RawEmail {
    std::string file_id;
    // Parse order preserved; lookups are case-insensitive on the name and
    // return the last occurrence.
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::size_t byte_len = 0;

    std::optional<std::string> header(std::string_view name) const {
        std::optional<std::string> found;
        for (const auto& [k, v] : headers) {
            if (k.size() != name.size()) continue;
            bool eq = true;
            for (std::size_t i = 0; i < k.size(); ++i)
                if (std::tolower(static_cast<unsigned char>(k[i])) !=
                    std::tolower(static_cast<unsigned char>(name[i]))) { eq = false; break; }
            if (eq) found = v;
        }
        return found;
    }
};

struct CleanEmail {
    std::string file_id;
    std::string subject;
    std::string body;       // authored content only
    std::size_t char_len = 0;
    bool over_limit = false;

    /// The email as seen by every downstream consumer.
    std::string text() const { return "Subject: " + subject + "\n" + body; }
};

enum class RejectKind { ForwardOnly, EmptyAfterCleaning, Unparseable };

inline const char* to_string(RejectKind k) {
    switch (k) {
        case RejectKind::ForwardOnly: return "ForwardOnly";
        case RejectKind::EmptyAfterCleaning: return "EmptyAfterCleaning";
        case RejectKind::Unparseable: return "Unparseable";
    }
    return "?";
}

struct Rejection {
    RejectKind kind;
    std::string detail;
};

using ParseResult = std::variant<RawEmail, Rejection>;
using CleanResult = std::variant<CleanEmail, Rejection>;

/// Quoted-tail markers. A body line whose left-trimmed form starts with any
/// of these begins a quoted/forwarded tail; everything from that line on is
/// discarded. The defaults cover the dominant Enron reply and forward formats.
struct CleanConfig {
    std::vector<std::string> markers = {
        "-----Original Message-----",
        "---------------------- Forwarded by",
        ">",
    };
};

namespace detail {

inline std::string normalize_newlines(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const char c = bytes[i];
        if (c == '\r') {
            if (i + 1 < bytes.size() && bytes[i + 1] == '\n') continue;
            out.push_back('\n');
        } else {
            out.push_back(c);
        }
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::string_view ltrim(std::string_view s) {
    std::size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
    return s.substr(b);
}

inline bool is_marker_line(std::string_view line, const CleanConfig& cfg) {
    const std::string_view body = ltrim(line);
    for (const auto& m : cfg.markers)
        if (body.substr(0, m.size()) == m) return true;
    return false;
}

}  // namespace detail

/// Splits an RFC-822-style file into a header map and a verbatim body.
/// Lines up to the first blank line are headers, split at the first ':';
/// indented lines continue the previous header value. Line endings are
/// normalized to LF first, so any byte sequence decodes (Latin-1 semantics).
inline ParseResult parse_email(std::string_view bytes, std::string file_id = {}) {
    RawEmail raw;
    raw.file_id = std::move(file_id);
    raw.byte_len = bytes.size();

    const std::string text = detail::normalize_newlines(bytes);
    std::size_t pos = 0;
    bool first_line = true;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        const std::string_view line(text.data() + pos,
                                    (eol == std::string::npos ? text.size() : eol) - pos);
        if (line.empty()) {
            // End of header block; the rest is the body.
            pos = (eol == std::string::npos) ? text.size() : eol + 1;
            break;
        }
        const std::size_t colon = line.find(':');
        const bool continuation = (line[0] == ' ' || line[0] == '\t');
        if (first_line) {
            if (colon == std::string_view::npos)
                return Rejection{RejectKind::Unparseable, "no header block (first line has no ':')"};
            first_line = false;
        }
        if (!continuation && colon != std::string_view::npos) {
            raw.headers.emplace_back(std::string(detail::trim(line.substr(0, colon))),
                                     std::string(detail::trim(line.substr(colon + 1))));
        } else if (!raw.headers.empty()) {
            // Folded or stray line: treat as continuation of the previous value.
            auto& value = raw.headers.back().second;
            if (!value.empty()) value.push_back(' ');
            value.append(detail::trim(line));
        }
        if (eol == std::string::npos) { pos = text.size(); break; }
        pos = eol + 1;
    }
    if (raw.headers.empty())
        return Rejection{RejectKind::Unparseable, "empty input"};
    raw.body = text.substr(pos);
    return raw;
}

/// Drops headers except Subject, removes the quoted/forwarded tail, and
/// rejects emails that carry no authored content.
inline CleanResult clean_email(const RawEmail& raw, const CleanConfig& cfg = {}) {
    std::string subject = raw.header("subject").value_or("");

    // Cut from the first marker line to end of body.
    std::string_view body = raw.body;
    bool marker_found = false;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        const std::size_t eol = body.find('\n', pos);
        const std::string_view line =
            body.substr(pos, (eol == std::string_view::npos ? body.size() : eol) - pos);
        if (detail::is_marker_line(line, cfg)) {
            marker_found = true;
            body = body.substr(0, pos);
            break;
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }

    const std::string authored(detail::trim(body));
    if (marker_found && authored.empty())
        return Rejection{RejectKind::ForwardOnly, "nothing authored before quoted tail"};
    if (authored.empty() && subject.empty())
        return Rejection{RejectKind::EmptyAfterCleaning, "no subject and no body"};

    CleanEmail clean;
    clean.file_id = raw.file_id;
    clean.subject = std::move(subject);
    clean.body = authored;
    clean.char_len = clean.text().size();
    clean.over_limit = clean.char_len > kCharLenWarnLimit;
    return clean;
}

struct ScanEntry {
    std::string file_id;
    CleanResult result;
};

struct ScanResult {
    std::vector<ScanEntry> entries;  // ascending by integer file prefix
    std::size_t total_files = 0;
    std::size_t in_range = 0;
    std::size_t cleaned = 0;
};

/// Processes <root>/<sender>/sent/<N>. files whose integer prefix lies in
/// [range_lo, range_hi], in ascending numeric order. Unreadable files are
/// recorded as Unparseable and the scan continues.
inline ScanResult scan_sender_folder(const std::filesystem::path& root,
                                     const std::string& sender,
                                     std::uint64_t range_lo, std::uint64_t range_hi,
                                     const CleanConfig& cfg = {}) {
    namespace fs = std::filesystem;
    const fs::path dir = root / sender / "sent";
    if (!fs::is_directory(dir))
        throw DataError("not a directory: " + dir.string());

    std::vector<std::pair<std::uint64_t, fs::path>> in_range;
    ScanResult out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        ++out.total_files;
        const std::string name = entry.path().filename().string();
        std::size_t digits = 0;
        while (digits < name.size() && std::isdigit(static_cast<unsigned char>(name[digits])))
            ++digits;
        if (digits == 0 || (digits < name.size() && name[digits] != '.')) continue;
        const std::uint64_t number = std::stoull(name.substr(0, digits));
        if (number < range_lo || number > range_hi) continue;
        in_range.emplace_back(number, entry.path());
    }
    out.in_range = in_range.size();
    std::sort(in_range.begin(), in_range.end(),
              [](const auto& a, const auto& b) {
                  return a.first != b.first ? a.first < b.first : a.second < b.second;
              });

    for (const auto& [number, path] : in_range) {
        const std::string file_id = sender + "/sent/" + path.filename().string();
        std::ifstream f(path, std::ios::binary);
        std::ostringstream buf;
        buf << f.rdbuf();
        if (!f) {
            out.entries.push_back({file_id, Rejection{RejectKind::Unparseable, "unreadable file"}});
            continue;
        }
        ParseResult parsed = parse_email(buf.str(), file_id);
        if (auto* rej = std::get_if<Rejection>(&parsed)) {
            out.entries.push_back({file_id, *rej});
            continue;
        }
        CleanResult cleaned = clean_email(std::get<RawEmail>(parsed), cfg);
        if (std::holds_alternative<CleanEmail>(cleaned)) ++out.cleaned;
        out.entries.push_back({file_id, std::move(cleaned)});
    }
    return out;
}

/// One line per rejected file: file_id TAB kind.
inline void write_rejection_report(const std::vector<ScanEntry>& entries, std::ostream& os) {
    for (const auto& e : entries)
        if (const auto* rej = std::get_if<Rejection>(&e.result))
            os << e.file_id << '\t' << to_string(rej->kind) << '\n';
}

}  // namespace authmail
