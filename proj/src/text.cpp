#include "lsm/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "lsm/csv.hpp"
#include "lsm/errors.hpp"

#ifndef LSM_DATA_DIR
#define LSM_DATA_DIR "data"
#endif

namespace lsm {

namespace {

// Decodes one code point at `pos`, advancing it. Malformed bytes decode as
// U+FFFD and consume a single byte.
char32_t next_code_point(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) {
    return pos + k < s.size() && (static_cast<unsigned char>(s[pos + k]) & 0xC0) == 0x80;
  };
  auto byte = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[pos + k]) & 0x3F); };
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && b0 >= 0xC2 && cont(1)) {
    const char32_t cp = (static_cast<char32_t>(b0 & 0x1F) << 6) | byte(1);
    pos += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    const char32_t cp = (static_cast<char32_t>(b0 & 0x0F) << 12) | (byte(1) << 6) | byte(2);
    if (cp >= 0x800 && (cp < 0xD800 || cp > 0xDFFF)) {
      pos += 3;
      return cp;
    }
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    const char32_t cp =
        (static_cast<char32_t>(b0 & 0x07) << 18) | (byte(1) << 12) | (byte(2) << 6) | byte(3);
    if (cp >= 0x10000 && cp <= 0x10FFFF) {
      pos += 4;
      return cp;
    }
  }
  ++pos;
  return 0xFFFD;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool is_letter(char32_t c) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
  if (c == 0xAA || c == 0xB5 || c == 0xBA) return true;
  if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
  if (c >= 0x370 && c <= 0x3FF) return c != 0x375 && c != 0x37E && c != 0x384 && c != 0x385 && c != 0x387;
  if (c >= 0x400 && c <= 0x481) return true;
  if (c >= 0x48A && c <= 0x52F) return true;
  if (c >= 0x1E00 && c <= 0x1EFF) return true;
  return false;
}

bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
  if (c == 0x130) return 'i';
  if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  if (c >= 0x1E00 && c <= 0x1E95) return (c % 2 == 0) ? c + 1 : c;
  if (c == 0x1E9E) return 0xDF;
  if (c >= 0x1EA0 && c <= 0x1EFF) return (c % 2 == 0) ? c + 1 : c;
  return c;
}

bool is_handle_char(char32_t c) { return (c < 0x80 && (std::isalnum(static_cast<int>(c)) != 0)) || c == '_'; }

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    char c = s[pos + k];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
    if (c != prefix[k]) return false;
  }
  return true;
}

bool is_space(char32_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == 0xA0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t length = 0;
  bool has_letter = false;
  auto flush = [&] {
    if (length >= 2 && has_letter) tokens.push_back(current);
    current.clear();
    length = 0;
    has_letter = false;
  };

  std::size_t pos = 0;
  bool at_boundary = true;  // previous code point was not a word character
  while (pos < text.size()) {
    if (at_boundary && (starts_with_ci(text, pos, "http://") || starts_with_ci(text, pos, "https://") ||
                        starts_with_ci(text, pos, "www."))) {
      flush();
      while (pos < text.size()) {
        std::size_t probe = pos;
        if (is_space(next_code_point(text, probe))) break;
        pos = probe;
      }
      continue;
    }
    const char32_t c = next_code_point(text, pos);
    if (c == '@' && at_boundary) {
      std::size_t probe = pos;
      if (probe < text.size() && is_handle_char(next_code_point(text, probe))) {
        flush();
        while (pos < text.size()) {
          probe = pos;
          if (!is_handle_char(next_code_point(text, probe))) break;
          pos = probe;
        }
        continue;
      }
    }
    if (is_letter(c) || is_digit(c)) {
      append_utf8(current, to_lower(c));
      ++length;
      has_letter = has_letter || is_letter(c);
      at_boundary = false;
    } else {
      flush();
      at_boundary = true;
    }
  }
  flush();
  return tokens;
}

std::vector<std::pair<std::string, std::size_t>> word_frequency(const std::vector<std::string>& texts,
                                                                const Stopwords& stopwords,
                                                                std::size_t top_n) {
  if (top_n == 0) throw DomainError("top_n must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& token : tokenize(t)) {
      if (!stopwords.count(token)) ++counts[std::move(token)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_n) ranked.resize(top_n);
  return ranked;
}

Stopwords load_stopwords(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open stopword list " + path);
  Stopwords out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    for (auto& token : tokenize(line)) out.insert(std::move(token));
  }
  return out;
}

Stopwords default_stopwords() { return load_stopwords(std::string(LSM_DATA_DIR) + "/stopwords_de.txt"); }

std::vector<std::string> read_texts_csv(const std::string& path) {
  const auto table = csv::read_file(path);
  const auto col = table.column("text");
  std::vector<std::string> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() <= col) throw ParseError("row is missing the text column", row.line);
    out.push_back(row.fields[col]);
  }
  return out;
}

}  // namespace lsm
