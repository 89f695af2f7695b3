#include "rubrictree/text.hpp"

#include <cctype>

namespace rubrictree {

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c))
                           : static_cast<char>(c));
  }
  return out;
}

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading whitespace dropped
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(c));
      in_space = false;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string dedup_key(std::string_view s) { return to_lower(collapse_whitespace(s)); }

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace rubrictree
