#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace seqforge::uni {

/// Decodes UTF-8 into code points; malformed bytes become U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view text);

std::string encode_utf8(const std::vector<char32_t>& cps);
void append_utf8(std::string& out, char32_t cp);

/// Lowercases Latin-script letters (ASCII, Latin-1, Latin Extended-A,
/// Latin Extended Additional). Other code points pass through.
char32_t to_lower(char32_t cp);

/// Unicode general category P* over the Latin-script blocks this toolkit
/// handles (ASCII, Latin-1 and General Punctuation).
bool is_punct(char32_t cp);

bool is_ascii_digit(char32_t cp);
bool is_space(char32_t cp);

/// Composes combining dot-below/dot-above sequences into the precomposed
/// letters (o + U+0323 -> U+1ECD and friends), so byte-level variants of the
/// same Igbo grapheme unify before tokenization.
std::vector<char32_t> compose_dots(const std::vector<char32_t>& cps);

}  // namespace seqforge::uni
