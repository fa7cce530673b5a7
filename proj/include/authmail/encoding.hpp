#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace authmail {

// Character vocabulary: index 0 is reserved for padding and anything outside
// printable ASCII; indices 1..95 cover 0x20..0x7E as codepoint - 32 + 1.
inline constexpr int kCharVocabSize = 96;
inline constexpr std::size_t kDefaultSeqLen = 1024;

inline int char_index(unsigned char c) {
    if (c == '\n' || c == '\t') c = ' ';
    if (c >= 0x20 && c <= 0x7e) return static_cast<int>(c) - 0x20 + 1;
    return 0;
}

/// Inverse of char_index for indices 1..95; index 0 has no character.
inline char char_from_index(int index) {
    if (index < 1 || index >= kCharVocabSize)
        throw std::out_of_range("char_from_index: index " + std::to_string(index));
    return static_cast<char>(index + 0x20 - 1);
}

struct CharSequence {
    std::vector<std::int32_t> indices;  // exactly the requested length
    std::size_t original_len = 0;       // pre-truncation character count
};

/// Encodes text as a fixed-length sequence of character indices, truncating
/// past `length` and right-padding shorter text with 0.
inline CharSequence encode_chars(std::string_view text, std::size_t length = kDefaultSeqLen) {
    if (length < 1) throw std::invalid_argument("encode_chars: length must be >= 1");
    CharSequence seq;
    seq.original_len = text.size();
    seq.indices.assign(length, 0);
    const std::size_t n = text.size() < length ? text.size() : length;
    for (std::size_t i = 0; i < n; ++i)
        seq.indices[i] = char_index(static_cast<unsigned char>(text[i]));
    return seq;
}

/// Word -> count, ordered for deterministic iteration.
using WordBag = std::map<std::string, std::int64_t>;

inline bool is_word_char(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
}

/// Splits on every non-alphanumeric character, case preserved.
inline WordBag tokenize_words(std::string_view text) {
    WordBag bag;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_word_char(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) ++bag[std::string(text.substr(start, i - start))];
    }
    return bag;
}

}  // namespace authmail
