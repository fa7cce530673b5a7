#include <catch2/catch_amalgamated.hpp>

#include "authmail/encoding.hpp"

using namespace authmail;

TEST_CASE("char index maps printable ASCII with 0 reserved") {
    CHECK(char_index(' ') == 1);
    CHECK(char_index('A') == 34);
    CHECK(char_index('a') == 66);
    CHECK(char_index('0') == 17);
    CHECK(char_index('~') == 95);

    // whitespace folds to space, everything non-printable to 0
    CHECK(char_index('\n') == 1);
    CHECK(char_index('\t') == 1);
    CHECK(char_index('\x1f') == 0);
    CHECK(char_index('\x7f') == 0);
    CHECK(char_index(static_cast<unsigned char>(0xc3)) == 0);
    CHECK(char_index('\0') == 0);
}

TEST_CASE("char_from_index inverts char_index on the printable range") {
    for (int i = 1; i < kCharVocabSize; ++i)
        CHECK(char_index(static_cast<unsigned char>(char_from_index(i))) == i);
    CHECK_THROWS_AS(char_from_index(0), std::out_of_range);
    CHECK_THROWS_AS(char_from_index(96), std::out_of_range);
    CHECK_THROWS_AS(char_from_index(-1), std::out_of_range);
}

TEST_CASE("encode_chars pads and truncates to the requested length") {
    auto s = encode_chars("Hi", 6);
    REQUIRE(s.indices.size() == 6);
    CHECK(s.original_len == 2);
    CHECK(s.indices[0] == char_index('H'));
    CHECK(s.indices[1] == char_index('i'));
    for (int i = 2; i < 6; ++i) CHECK(s.indices[i] == 0);

    auto t = encode_chars("abcdef", 3);
    REQUIRE(t.indices.size() == 3);
    CHECK(t.original_len == 6);
    CHECK(t.indices[2] == char_index('c'));

    auto d = encode_chars("x");
    CHECK(d.indices.size() == kDefaultSeqLen);

    CHECK_THROWS_AS(encode_chars("x", 0), std::invalid_argument);
}

TEST_CASE("encode_chars maps every byte through char_index") {
    std::string text = "A \n\xff z";
    auto s = encode_chars(text, text.size());
    for (std::size_t i = 0; i < text.size(); ++i)
        CHECK(s.indices[i] == char_index(static_cast<unsigned char>(text[i])));
}

TEST_CASE("tokenize_words splits on non-alphanumerics and preserves case") {
    auto bag = tokenize_words("Hello, world! Hello?");
    REQUIRE(bag.size() == 2);
    CHECK(bag["Hello"] == 2);
    CHECK(bag["world"] == 1);

    auto mixed = tokenize_words("R2D2 isn't  here\nVince");
    CHECK(mixed["R2D2"] == 1);
    CHECK(mixed["isn"] == 1);
    CHECK(mixed["t"] == 1);
    CHECK(mixed["here"] == 1);
    CHECK(mixed["Vince"] == 1);
    CHECK(mixed.count("vince") == 0);

    CHECK(tokenize_words("").empty());
    CHECK(tokenize_words("  ...!?  ").empty());
}
