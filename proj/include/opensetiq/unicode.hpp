#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace osiq::unicode {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes UTF-8; malformed sequences become U+FFFD (one per bad byte).
std::vector<char32_t> decode_utf8(std::string_view text);

std::string encode_utf8(std::span<const char32_t> points);

/// Unicode whitespace (White_Space property).
bool is_space(char32_t cp);

/// Lowercases ASCII and the Latin-1 supplement; other points unchanged.
char32_t to_lower(char32_t cp);

/// Canonical composition restricted to the Latin-1 repertoire: a base
/// letter followed by a combining grave/acute/circumflex/tilde/diaeresis/
/// ring/cedilla becomes its precomposed form when one exists. Sequences
/// outside this table pass through unchanged.
void compose_latin(std::vector<char32_t>& points);

}  // namespace osiq::unicode
