#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mmtlab::text {

/// A whitespace-delimited word plus the whitespace that preceded it.
struct Token {
  std::string_view leading;
  std::string_view word;
};

/// Splits on runs of Unicode whitespace (UTF-8). `trailing` receives the
/// whitespace after the last word. Concatenating every token's `leading` and
/// `word` followed by `trailing` reproduces the input.
std::vector<Token> tokenize_preserving(std::string_view s, std::string_view* trailing = nullptr);

std::vector<std::string> split_whitespace(std::string_view s);

/// Whitespace split, then punctuation and symbols become separate tokens.
std::vector<std::string> split_international(std::string_view s);

std::string trim(std::string_view s);

/// ASCII-only lowercase; other bytes are left untouched.
std::string ascii_lower(std::string_view s);

/// Decodes UTF-8; malformed bytes are mapped to U+FFFD one byte at a time.
std::u32string decode_utf8(std::string_view s);

bool is_unicode_space(char32_t c) noexcept;

/// Length in bytes of the UTF-8 whitespace sequence at `pos`, 0 if none.
std::size_t whitespace_length_at(std::string_view s, std::size_t pos) noexcept;

}  // namespace mmtlab::text
