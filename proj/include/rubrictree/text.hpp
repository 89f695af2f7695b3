#pragma once

#include <string>
#include <string_view>

namespace rubrictree {

// ASCII-only case folding; bytes >= 0x80 pass through untouched.
std::string to_lower(std::string_view s);

std::string trim(std::string_view s);

/// Collapses interior whitespace runs to single spaces and trims the ends.
std::string collapse_whitespace(std::string_view s);

/// Case-folded, whitespace-collapsed form used for name/statement
/// deduplication across the expansion tree.
std::string dedup_key(std::string_view s);

/// Word characters are ASCII alphanumerics; bytes >= 0x80 are also kept so
/// UTF-8 words survive intact.
bool is_word_char(unsigned char c);

}  // namespace rubrictree
