#pragma once

// Deterministic synthetic mail corpora with strongly contrasting writing
// styles, shared by the unit, CLI, and acceptance tests. One "house" style
// stands in for the genuine sender; three impostor styles (formal pitch,
// office memo, urgent wire) stand in for machine-written, other-sender, and
// scam traffic.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "authmail/dataset.hpp"
#include "authmail/rng.hpp"

namespace testsupport {

enum class Style { Casual, FormalPitch, OfficeMemo, UrgentWire };

namespace detail {

template <std::size_t N>
const char* pick(std::mt19937_64& rng, const char* (&pool)[N]) {
    return pool[authmail::next_index(rng, N)];
}

inline std::string casual_text(std::mt19937_64& rng) {
    static const char* subjects[] = {"gas curve update", "meeting tomorrow", "var numbers",
                                     "quick question",   "model run",        "re schedule",
                                     "friday plans",     "storage deal"};
    static const char* nouns[] = {"curve",  "model", "deal",   "draft", "memo",
                                  "number", "run",   "report", "book"};
    static const char* names[] = {"stinson", "krishna", "tanya", "grant", "mike", "shirley"};
    static const char* days[] = {"monday", "tuesday", "wednesday", "thursday", "friday"};
    static const char* lines[] = {
        "thanks for the note.",
        "looks fine to me.",
        "i shall be out %DAY% morning.",
        "can we move it to %DAY%?",
        "the %NOUN% needs another pass before we send it out.",
        "please ask %NAME% to update the %NOUN%.",
        "let me know if %NAME% still needs the %NOUN%.",
        "i talked to %NAME% about the %NOUN% yesterday.",
        "no objections here.",
        "we can discuss at the staff meeting.",
    };
    static const char* signoffs[] = {"vince", "thanks, vince", "v.", "talk later, vince"};

    std::string body;
    const std::size_t n = 2 + authmail::next_index(rng, 4);
    for (std::size_t i = 0; i < n; ++i) {
        std::string s = pick(rng, lines);
        auto sub = [&](const char* slot, const char* word) {
            for (std::size_t p; (p = s.find(slot)) != std::string::npos;)
                s.replace(p, std::string(slot).size(), word);
        };
        sub("%NOUN%", pick(rng, nouns));
        sub("%NAME%", pick(rng, names));
        sub("%DAY%", pick(rng, days));
        body += s;
        body += '\n';
    }
    body += '\n';
    body += pick(rng, signoffs);
    return "Subject: " + std::string(pick(rng, subjects)) + "\n" + body;
}

inline std::string formal_pitch_text(std::mt19937_64& rng) {
    static const char* subjects[] = {"Application for the Analyst Position",
                                     "A Resume for Your Consideration",
                                     "Expression of Interest",
                                     "Inquiry Regarding Research Opportunities",
                                     "Candidacy for the Quantitative Role"};
    static const char* salutations[] = {"Dear Mr. Kaminski,", "Dear Sir or Madam,",
                                        "Dear Hiring Committee,"};
    static const char* fields[] = {"derivatives pricing", "stochastic modelling",
                                   "risk management",     "energy economics",
                                   "computational finance"};
    static const char* lines[] = {
        "I am writing to express my sincere interest in joining your distinguished research group.",
        "My academic background encompasses extensive coursework in %FIELD%.",
        "Furthermore, I possess demonstrable expertise in %FIELD% and related disciplines.",
        "I would welcome the opportunity to discuss how my qualifications align with your requirements.",
        "Enclosed please find my curriculum vitae for your kind consideration.",
        "It would be a privilege to contribute to your ongoing initiatives in %FIELD%.",
        "I remain confident that my credentials satisfy the expectations of your esteemed organization.",
    };
    static const char* signoffs[] = {"Sincerely yours,\nJonathan P. Whitfield",
                                     "Respectfully submitted,\nKatherine L. Mabry",
                                     "With highest regards,\nAlexander D. Rowe"};

    std::string body = pick(rng, salutations);
    body += "\n\n";
    const std::size_t n = 3 + authmail::next_index(rng, 3);
    for (std::size_t i = 0; i < n; ++i) {
        std::string s = pick(rng, lines);
        for (std::size_t p; (p = s.find("%FIELD%")) != std::string::npos;)
            s.replace(p, 7, pick(rng, fields));
        body += s;
        body += '\n';
    }
    body += '\n';
    body += pick(rng, signoffs);
    return "Subject: " + std::string(pick(rng, subjects)) + "\n" + body;
}

inline std::string office_memo_text(std::mt19937_64& rng) {
    static const char* subjects[] = {"Updated Project Timeline", "Weekly Status Report",
                                     "Conference Room Booking",  "Expense Policy Reminder",
                                     "Quarterly Review Agenda"};
    static const char* docs[] = {"status report", "timeline",       "agenda",
                                 "policy memo",   "budget summary", "minutes"};
    static const char* days[] = {"Monday", "Wednesday", "Thursday"};
    static const char* lines[] = {
        "Hi team,",
        "Please find the %DOC% attached for your review.",
        "The schedule for %DAY% has been updated accordingly.",
        "Kindly submit your comments on the %DOC% by end of day %DAY%.",
        "A follow-up session will be arranged once the %DOC% is finalized.",
        "Remember to log your hours before the %DAY% deadline.",
    };
    static const char* signoffs[] = {"Best regards,\nJohn Carter", "Kind regards,\nSusan Lee",
                                     "Regards,\nFacilities Office"};

    std::string body;
    const std::size_t n = 3 + authmail::next_index(rng, 3);
    for (std::size_t i = 0; i < n; ++i) {
        std::string s = pick(rng, lines);
        auto sub = [&](const char* slot, std::size_t len, const char* word) {
            for (std::size_t p; (p = s.find(slot)) != std::string::npos;)
                s.replace(p, len, word);
        };
        sub("%DOC%", 5, pick(rng, docs));
        sub("%DAY%", 5, pick(rng, days));
        body += s;
        body += '\n';
    }
    body += '\n';
    body += pick(rng, signoffs);
    return "Subject: " + std::string(pick(rng, subjects)) + "\n" + body;
}

inline std::string urgent_wire_text(std::mt19937_64& rng) {
    static const char* subjects[] = {"URGENT wire transfer", "Immediate payment required",
                                     "Confidential request", "Outstanding invoice FINAL NOTICE"};
    static const char* amounts[] = {"$18,400", "$27,950", "$9,870", "$45,200"};
    static const char* lines[] = {
        "I need you to process a wire transfer immediately.",
        "Please keep this strictly confidential until the transaction is complete.",
        "Send %AMT% to the account details below before close of business.",
        "I am in a meeting and cannot take calls, reply by email only.",
        "This payment to our vendor is overdue and must go out today.",
        "Confirm once the transfer of %AMT% has been executed.",
    };
    static const char* signoffs[] = {"Sent from my iPhone", "Regards\nCEO office",
                                     "Thanks\nSent from mobile"};

    std::string body;
    const std::size_t n = 2 + authmail::next_index(rng, 3);
    for (std::size_t i = 0; i < n; ++i) {
        std::string s = pick(rng, lines);
        for (std::size_t p; (p = s.find("%AMT%")) != std::string::npos;)
            s.replace(p, 5, pick(rng, amounts));
        body += s;
        body += '\n';
    }
    body += '\n';
    body += pick(rng, signoffs);
    return "Subject: " + std::string(pick(rng, subjects)) + "\n" + body;
}

}  // namespace detail

inline std::string synth_text(Style style, std::mt19937_64& rng) {
    switch (style) {
        case Style::Casual: return detail::casual_text(rng);
        case Style::FormalPitch: return detail::formal_pitch_text(rng);
        case Style::OfficeMemo: return detail::office_memo_text(rng);
        case Style::UrgentWire: return detail::urgent_wire_text(rng);
    }
    throw std::logic_error("unknown style");
}

inline std::vector<authmail::EmailRecord> make_records(Style style, std::size_t n,
                                                       std::uint64_t seed, int label,
                                                       authmail::Source source,
                                                       const std::string& id_prefix) {
    std::mt19937_64 rng(seed);
    std::vector<authmail::EmailRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        authmail::EmailRecord r;
        r.id = id_prefix + "/" + std::to_string(i + 1);
        r.text = synth_text(style, rng);
        r.label = label;
        r.source = source;
        out.push_back(std::move(r));
    }
    return out;
}

struct SynthCorpus {
    std::vector<authmail::EmailRecord> authentic;
    std::vector<authmail::EmailRecord> inauthentic;
};

/// Two cleanly separated styles, n per class.
inline SynthCorpus easy_corpus(std::size_t n_per_class, std::uint64_t seed) {
    using authmail::Source;
    SynthCorpus c;
    c.authentic = make_records(Style::Casual, n_per_class, authmail::derive_seed(seed, 1), 1,
                               Source::Authentic1, "house");
    c.inauthentic = make_records(Style::FormalPitch, n_per_class, authmail::derive_seed(seed, 2),
                                 0, Source::Inauthentic1, "pitch");
    return c;
}

/// 369 genuine vs a 1017-strong mix of three impostor styles; mirrors the
/// shape of the larger benchmark split (1386 total).
inline SynthCorpus hard_corpus(std::uint64_t seed) {
    using authmail::Source;
    SynthCorpus c;
    c.authentic = make_records(Style::Casual, 369, authmail::derive_seed(seed, 1), 1,
                               Source::Authentic1, "house");
    c.inauthentic = make_records(Style::FormalPitch, 369, authmail::derive_seed(seed, 2), 0,
                                 Source::Inauthentic1, "pitch");
    auto memo = make_records(Style::OfficeMemo, 369, authmail::derive_seed(seed, 3), 0,
                             Source::Inauthentic2, "memo");
    auto wire = make_records(Style::UrgentWire, 279, authmail::derive_seed(seed, 4), 0,
                             Source::Inauthentic3Bec, "wire");
    c.inauthentic.insert(c.inauthentic.end(), memo.begin(), memo.end());
    c.inauthentic.insert(c.inauthentic.end(), wire.begin(), wire.end());
    return c;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + p.string());
}

/// Lays out <root>/<sender>/sent/<N>. raw mail files in maildir-export style.
inline void write_sender_tree(const std::filesystem::path& root, const std::string& sender,
                              const std::vector<std::pair<int, std::string>>& files) {
    for (const auto& [num, content] : files)
        write_file(root / sender / "sent" / (std::to_string(num) + "."), content);
}

/// Raw file with a plausible header block around the authored content.
inline std::string raw_email(const std::string& subject, const std::string& body) {
    return "Message-ID: <" + std::to_string(std::hash<std::string>{}(subject + body) % 100000) +
           ".JavaMail.evans@thyme>\n"
           "Date: Wed, 25 Oct 2000 08:14:00 -0700 (PDT)\n"
           "From: sender@example.com\n"
           "To: recipient@example.com\n"
           "Subject: " + subject + "\n"
           "Mime-Version: 1.0\n"
           "\n" + body;
}

}  // namespace testsupport
