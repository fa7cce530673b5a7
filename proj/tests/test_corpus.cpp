#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <variant>

#include "authmail/corpus.hpp"

using namespace authmail;

namespace {

const std::filesystem::path kDataDir = AUTHMAIL_TEST_DATA_DIR;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

RawEmail parse_ok(const std::string& bytes, std::string id = {}) {
    auto r = parse_email(bytes, std::move(id));
    REQUIRE(std::holds_alternative<RawEmail>(r));
    return std::get<RawEmail>(r);
}

CleanEmail clean_ok(const RawEmail& raw) {
    auto c = clean_email(raw);
    REQUIRE(std::holds_alternative<CleanEmail>(c));
    return std::get<CleanEmail>(c);
}

Rejection clean_rejected(const RawEmail& raw) {
    auto c = clean_email(raw);
    REQUIRE(std::holds_alternative<Rejection>(c));
    return std::get<Rejection>(c);
}

}  // namespace

TEST_CASE("parse_email splits headers from body") {
    auto raw = parse_ok("From: a@b\nSubject: hi\n\nline one\nline two\n");
    CHECK(raw.header("subject") == "hi");
    CHECK(raw.header("SUBJECT") == "hi");
    CHECK(raw.header("from") == "a@b");
    CHECK(!raw.header("cc").has_value());
    CHECK(raw.body == "line one\nline two\n");
}

TEST_CASE("parse_email keeps the last duplicate header and joins folded lines") {
    auto raw = parse_ok("Subject: first\nSubject: second\nX-Long: part one\n and part two\n\nb\n");
    CHECK(raw.header("subject") == "second");
    CHECK(raw.header("x-long") == "part one and part two");
}

TEST_CASE("parse_email normalizes CRLF line endings") {
    auto raw = parse_ok("Subject: split header\r\n\tacross two lines\r\n\r\nBody text.\r\n");
    CHECK(raw.header("subject") == "split header across two lines");
    CHECK(raw.body == "Body text.\n");
}

TEST_CASE("parse_email rejects files without a header block") {
    auto r1 = parse_email("just a sentence with no colon\nmore text\n");
    REQUIRE(std::holds_alternative<Rejection>(r1));
    CHECK(std::get<Rejection>(r1).kind == RejectKind::Unparseable);

    auto r2 = parse_email("");
    REQUIRE(std::holds_alternative<Rejection>(r2));
    CHECK(std::get<Rejection>(r2).kind == RejectKind::Unparseable);
}

TEST_CASE("cleaning keeps only subject and authored body") {
    const auto raw = parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/1."), "1.");
    const auto clean = clean_ok(raw);

    // the exact expected text, double space and all
    const std::string expected =
        "Subject: A resume for Londom\n"
        "This is a resume of one guy I met in Houston a few months ago.\n"
        "He comes across as a very bright and  qualified individual. "
        "He is interested in a position in London. "
        "Who is the best person in London to forward the resume to?\n"
        "\n"
        "Vince";
    CHECK(clean.text() == expected);
    CHECK(clean.subject == "A resume for Londom");
    CHECK(clean.char_len == expected.size());
    CHECK(!clean.over_limit);
}

TEST_CASE("cleaning cuts the quoted tail at the first marker line") {
    SECTION("Original Message banner, even indented") {
        const auto raw = parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/2."));
        const auto clean = clean_ok(raw);
        CHECK(clean.body == "See below.\n\nVince");
        CHECK(clean.body.find("Original Message") == std::string::npos);
        CHECK(clean.body.find("Stinson") == std::string::npos);
    }
    SECTION("'>' quote prefix") {
        const auto raw = parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/7."));
        const auto clean = clean_ok(raw);
        CHECK(clean.body == "Agreed on all points.");
    }
}

TEST_CASE("forward-only emails are rejected, not kept empty") {
    const auto raw = parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/3."));
    CHECK(clean_rejected(raw).kind == RejectKind::ForwardOnly);
}

TEST_CASE("emails with neither subject nor body are rejected") {
    const auto raw = parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/4."));
    CHECK(clean_rejected(raw).kind == RejectKind::EmptyAfterCleaning);
}

TEST_CASE("header lookup is case-insensitive end to end") {
    const auto raw = parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/5."));
    const auto clean = clean_ok(raw);
    CHECK(clean.subject == "lunch on friday");
}

TEST_CASE("subject-only and body-only emails both survive cleaning") {
    const auto with_subject = clean_ok(parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/8.")));
    CHECK(with_subject.subject == "FYI");
    CHECK(with_subject.body.empty());
    CHECK(with_subject.text() == "Subject: FYI\n");

    const auto without = clean_ok(parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/9.")));
    CHECK(without.subject.empty());
    CHECK(without.body == "The meeting moved to three o'clock.");
}

TEST_CASE("long cleaned emails are kept but flagged") {
    const auto clean = clean_ok(parse_ok(slurp(kDataDir / "enron_mini/kaminski-v/sent/10.")));
    CHECK(clean.char_len > kCharLenWarnLimit);
    CHECK(clean.over_limit);
}

TEST_CASE("scan walks numeric files in range, ascending") {
    const auto scan = scan_sender_folder(kDataDir / "enron_mini", "kaminski-v", 1, 600);
    CHECK(scan.total_files == 13);  // 11 in range + "601." + "notes.txt"
    CHECK(scan.in_range == 11);
    CHECK(scan.cleaned == 8);       // minus ForwardOnly, EmptyAfterCleaning, Unparseable
    REQUIRE(scan.entries.size() == 11);
    CHECK(scan.entries.front().file_id == "kaminski-v/sent/1.");
    CHECK(scan.entries.back().file_id == "kaminski-v/sent/11.");
    for (const auto& e : scan.entries) CHECK(e.file_id.find("601") == std::string::npos);

    std::size_t rejected = 0;
    for (const auto& e : scan.entries)
        if (std::holds_alternative<Rejection>(e.result)) ++rejected;
    CHECK(rejected == 3);
}

TEST_CASE("scan respects the numeric range bounds") {
    const auto all = scan_sender_folder(kDataDir / "enron_sparse", "kaminski-v", 1, 600);
    REQUIRE(all.entries.size() == 3);
    CHECK(all.entries[0].file_id == "kaminski-v/sent/1.");
    CHECK(all.entries[1].file_id == "kaminski-v/sent/3.");
    CHECK(all.entries[2].file_id == "kaminski-v/sent/600.");

    const auto mid = scan_sender_folder(kDataDir / "enron_sparse", "kaminski-v", 2, 599);
    REQUIRE(mid.entries.size() == 1);
    CHECK(mid.entries[0].file_id == "kaminski-v/sent/3.");

    const auto past = scan_sender_folder(kDataDir / "enron_sparse", "kaminski-v", 601, 700);
    REQUIRE(past.entries.size() == 1);
    CHECK(past.entries[0].file_id == "kaminski-v/sent/601.");
}

TEST_CASE("scan refuses a missing sender folder") {
    CHECK_THROWS_AS(scan_sender_folder(kDataDir / "enron_mini", "nobody", 1, 600), DataError);
}

TEST_CASE("rejection report lists file id and kind, tab separated") {
    const auto scan = scan_sender_folder(kDataDir / "enron_mini", "kaminski-v", 1, 600);
    std::ostringstream os;
    write_rejection_report(scan.entries, os);
    const std::string report = os.str();
    CHECK(report.find("kaminski-v/sent/3.\tForwardOnly\n") != std::string::npos);
    CHECK(report.find("kaminski-v/sent/4.\tEmptyAfterCleaning\n") != std::string::npos);
    CHECK(report.find("kaminski-v/sent/6.\tUnparseable\n") != std::string::npos);
    CHECK(std::count(report.begin(), report.end(), '\n') == 3);
}
