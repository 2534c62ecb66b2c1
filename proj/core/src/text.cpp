#include "mmtlab/text.hpp"

namespace mmtlab::text {
namespace {

// Decodes one code point at `pos`; returns its byte length (>= 1).
std::size_t decode_one(std::string_view s, std::size_t pos, char32_t& out) noexcept {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    out = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0 && b0 >= 0xC2) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      out = (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
      return 2;
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      const char32_t cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
      if (cp >= 0x800 && (cp < 0xD800 || cp > 0xDFFF)) {
        out = cp;
        return 3;
      }
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      const char32_t cp = (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) |
                          (char32_t(c2) << 6) | char32_t(c3);
      if (cp >= 0x10000 && cp <= 0x10FFFF) {
        out = cp;
        return 4;
      }
    }
  }
  out = 0xFFFD;
  return 1;
}

bool is_punctuation(char32_t c) noexcept {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  return (c >= 0x00A1 && c <= 0x00BF) || c == 0x00D7 || c == 0x00F7 || c == 0x0964 ||
         c == 0x0965 || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x20A0 && c <= 0x20CF) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011) || (c >= 0xFF01 && c <= 0xFF0F);
}

}  // namespace

bool is_unicode_space(char32_t c) noexcept {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

std::size_t whitespace_length_at(std::string_view s, std::size_t pos) noexcept {
  char32_t cp = 0;
  const std::size_t len = decode_one(s, pos, cp);
  return is_unicode_space(cp) ? len : 0;
}

std::vector<Token> tokenize_preserving(std::string_view s, std::string_view* trailing) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t ws_begin = pos;
    while (pos < s.size()) {
      const std::size_t n = whitespace_length_at(s, pos);
      if (n == 0) break;
      pos += n;
    }
    if (pos >= s.size()) {
      if (trailing) *trailing = s.substr(ws_begin);
      return tokens;
    }
    const std::size_t word_begin = pos;
    while (pos < s.size() && whitespace_length_at(s, pos) == 0) {
      char32_t cp = 0;
      pos += decode_one(s, pos, cp);
    }
    tokens.push_back({s.substr(ws_begin, word_begin - ws_begin), s.substr(word_begin, pos - word_begin)});
  }
  if (trailing) *trailing = s.substr(s.size());
  return tokens;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  for (const Token& t : tokenize_preserving(s)) out.emplace_back(t.word);
  return out;
}

std::vector<std::string> split_international(std::string_view s) {
  std::vector<std::string> out;
  for (const Token& t : tokenize_preserving(s)) {
    std::string current;
    std::size_t pos = 0;
    while (pos < t.word.size()) {
      char32_t cp = 0;
      const std::size_t len = decode_one(t.word, pos, cp);
      if (is_punctuation(cp)) {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
        out.emplace_back(t.word.substr(pos, len));
      } else {
        current.append(t.word.substr(pos, len));
      }
      pos += len;
    }
    if (!current.empty()) out.push_back(std::move(current));
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto tokens = tokenize_preserving(s);
  if (tokens.empty()) return {};
  const char* begin = tokens.front().word.data();
  const char* end = tokens.back().word.data() + tokens.back().word.size();
  return std::string(begin, end);
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    char32_t cp = 0;
    pos += decode_one(s, pos, cp);
    out.push_back(cp);
  }
  return out;
}

}  // namespace mmtlab::text
