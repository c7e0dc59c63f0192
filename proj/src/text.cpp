#include "starqa/text.hpp"

#include <cstdint>

namespace starqa::text {
namespace {

struct CodePoint {
  char32_t value;
  std::size_t length;  // bytes consumed
};

// Invalid sequences decode as a single byte so the input is never rejected.
CodePoint decode(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
  }
  return {b0, 1};
}

bool is_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_edge_punct(char32_t c) {
  switch (c) {
    case U'.': case U',': case U';': case U':': case U'!': case U'?':
    case U'"': case U'\'': case U'`': case U'(': case U')': case U'[':
    case U']': case U'{': case U'}': case U'<': case U'>': case U'*':
    case U'_': case U'~': case U'|': case U'/': case U'\\': case U'-':
    case U'=': case U'^':
    case 0x2018: case 0x2019: case 0x201C: case 0x201D:  // curly quotes
    case 0x2013: case 0x2014: case 0x2026:               // dashes, ellipsis
    case 0x00AB: case 0x00BB:                            // guillemets
    case 0x3001: case 0x3002: case 0xFF0C:               // CJK comma/period
      return true;
    default:
      return false;
  }
}

std::string strip_edges(std::string_view token) {
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end) {
    const auto cp = decode(token, begin);
    if (!is_edge_punct(cp.value)) break;
    begin += cp.length;
  }
  // Trailing punctuation: walk forward, remembering where the last
  // non-punctuation code point ended.
  std::size_t last_keep = begin;
  for (std::size_t pos = begin; pos < end;) {
    const auto cp = decode(token, pos);
    pos += cp.length;
    if (!is_edge_punct(cp.value)) last_keep = pos;
  }
  std::string out(token.substr(begin, last_keep - begin));
  for (char& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

template <typename Fn>
void for_each_word(std::string_view input, Fn&& fn) {
  std::size_t start = std::string_view::npos;
  for (std::size_t pos = 0; pos < input.size();) {
    const auto cp = decode(input, pos);
    if (is_space(cp.value)) {
      if (start != std::string_view::npos) fn(input.substr(start, pos - start));
      start = std::string_view::npos;
    } else if (start == std::string_view::npos) {
      start = pos;
    }
    pos += cp.length;
  }
  if (start != std::string_view::npos) fn(input.substr(start));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
  std::vector<std::string> tokens;
  for_each_word(input, [&](std::string_view word) {
    auto token = strip_edges(word);
    if (!token.empty()) tokens.push_back(std::move(token));
  });
  return tokens;
}

std::vector<std::string> tokenize_path_text(std::string_view input) {
  std::string spaced(input);
  for (std::size_t pos = spaced.find(">>"); pos != std::string::npos; pos = spaced.find(">>", pos)) {
    spaced.replace(pos, 2, "  ");
  }
  return tokenize(spaced);
}

std::string normalize(std::string_view input) {
  std::string out;
  for (const auto& token : tokenize(input)) {
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

std::string trim(std::string_view input) {
  std::size_t begin = 0;
  while (begin < input.size()) {
    const auto cp = decode(input, begin);
    if (!is_space(cp.value)) break;
    begin += cp.length;
  }
  std::size_t end = begin;
  for (std::size_t pos = begin; pos < input.size();) {
    const auto cp = decode(input, pos);
    pos += cp.length;
    if (!is_space(cp.value)) end = pos;
  }
  return std::string(input.substr(begin, end - begin));
}

std::string collapse_whitespace(std::string_view input) {
  std::string out;
  for_each_word(input, [&](std::string_view word) {
    if (!out.empty()) out.push_back(' ');
    out.append(word);
  });
  return out;
}

std::string truncate_for_prompt(std::string_view input, std::size_t max_chars) {
  std::size_t count = 0;
  for (std::size_t pos = 0; pos < input.size();) {
    if (count == max_chars) return std::string(input.substr(0, pos)) + "...";
    pos += decode(input, pos).length;
    ++count;
  }
  return std::string(input);
}

}  // namespace starqa::text
