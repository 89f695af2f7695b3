#include <array>
#include <string>
#include <string_view>

#include "rubrictree/taxonomy.hpp"
#include "rubrictree/text.hpp"

// Five-phase English suffix stripper over a fixed rule table: plural and
// participle reduction, y->i, two derivational-suffix tables, then cleanup.
// Conditions use the usual consonant-vowel measure. The table is part of the
// library contract and pinned by tests; stems are cluster keys, not words.

namespace rubrictree {

namespace {

bool is_consonant(const std::string& w, size_t i) {
  switch (w[i]) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return false;
    case 'y':
      return i == 0 ? true : !is_consonant(w, i - 1);
    default:
      return true;
  }
}

// number of vowel->consonant transitions in w[0..len)
int measure(const std::string& w, size_t len) {
  int m = 0;
  size_t i = 0;
  while (i < len && is_consonant(w, i)) ++i;
  for (;;) {
    while (i < len && !is_consonant(w, i)) ++i;
    if (i >= len) break;
    ++m;
    while (i < len && is_consonant(w, i)) ++i;
  }
  return m;
}

bool has_vowel(const std::string& w, size_t len) {
  for (size_t i = 0; i < len; ++i)
    if (!is_consonant(w, i)) return true;
  return false;
}

bool ends_double_consonant(const std::string& w) {
  size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

// last three letters consonant-vowel-consonant, final one not w/x/y
bool ends_cvc(const std::string& w, size_t len) {
  if (len < 3) return false;
  if (!is_consonant(w, len - 3) || is_consonant(w, len - 2) ||
      !is_consonant(w, len - 1))
    return false;
  char last = w[len - 1];
  return last != 'w' && last != 'x' && last != 'y';
}

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() &&
         w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct Rule {
  std::string_view suffix;
  std::string_view replacement;
  int min_measure;
};

// longest matching suffix wins; the rule applies only if the remaining stem
// clears min_measure (otherwise the step is a no-op)
void apply_table(std::string& w, const Rule* rules, size_t count) {
  const Rule* best = nullptr;
  for (size_t i = 0; i < count; ++i) {
    if (ends_with(w, rules[i].suffix) &&
        (!best || rules[i].suffix.size() > best->suffix.size()))
      best = &rules[i];
  }
  if (!best) return;
  size_t stem_len = w.size() - best->suffix.size();
  if (measure(w, stem_len) > best->min_measure) {
    w.resize(stem_len);
    w.append(best->replacement);
  }
}

constexpr std::array<Rule, 21> kStep2Rules = {{
    {"ational", "ate", 0}, {"tional", "tion", 0}, {"enci", "ence", 0},
    {"anci", "ance", 0},   {"izer", "ize", 0},    {"abli", "able", 0},
    {"alli", "al", 0},     {"entli", "ent", 0},   {"eli", "e", 0},
    {"ousli", "ous", 0},   {"ization", "ize", 0}, {"ation", "ate", 0},
    {"ator", "ate", 0},    {"alism", "al", 0},    {"iveness", "ive", 0},
    {"fulness", "ful", 0}, {"ousness", "ous", 0}, {"aliti", "al", 0},
    {"iviti", "ive", 0},   {"biliti", "ble", 0},  {"eti", "e", 0},
}};

constexpr std::array<Rule, 7> kStep3Rules = {{
    {"icate", "ic", 0}, {"ative", "", 0}, {"alize", "al", 0}, {"iciti", "ic", 0},
    {"ical", "ic", 0},  {"ful", "", 0},   {"ness", "", 0},
}};

constexpr std::array<std::string_view, 19> kStep4Suffixes = {
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
    "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
};

void step1a(std::string& w) {
  if (ends_with(w, "sses")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ss")) {
    // keep
  } else if (ends_with(w, "s")) {
    w.pop_back();
  }
}

void step1b(std::string& w) {
  if (ends_with(w, "eed")) {
    if (measure(w, w.size() - 3) > 0) w.pop_back();
    return;
  }
  bool stripped = false;
  if (ends_with(w, "ed") && has_vowel(w, w.size() - 2)) {
    w.resize(w.size() - 2);
    stripped = true;
  } else if (ends_with(w, "ing") && has_vowel(w, w.size() - 3)) {
    w.resize(w.size() - 3);
    stripped = true;
  }
  if (!stripped) return;
  if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
    w.push_back('e');
  } else if (ends_double_consonant(w)) {
    char last = w.back();
    if (last != 'l' && last != 's' && last != 'z') w.pop_back();
  } else if (measure(w, w.size()) == 1 && ends_cvc(w, w.size())) {
    w.push_back('e');
  }
}

void step1c(std::string& w) {
  if (ends_with(w, "y") && has_vowel(w, w.size() - 1)) w.back() = 'i';
}

void step4(std::string& w) {
  const std::string_view* best = nullptr;
  for (const auto& suffix : kStep4Suffixes) {
    if (ends_with(w, suffix) && (!best || suffix.size() > best->size()))
      best = &suffix;
  }
  if (!best) return;
  size_t stem_len = w.size() - best->size();
  if (*best == "ion") {
    if (stem_len == 0 || (w[stem_len - 1] != 's' && w[stem_len - 1] != 't')) return;
  }
  if (measure(w, stem_len) > 1) w.resize(stem_len);
}

void step5(std::string& w) {
  if (ends_with(w, "e")) {
    size_t stem_len = w.size() - 1;
    int m = measure(w, stem_len);
    if (m > 1 || (m == 1 && !ends_cvc(w, stem_len))) w.pop_back();
  }
  if (ends_with(w, "ll") && measure(w, w.size()) > 1) w.pop_back();
}

}  // namespace

std::string stem(std::string_view word) {
  std::string w = to_lower(word);
  if (w.size() <= 2) return w;
  step1a(w);
  step1b(w);
  step1c(w);
  apply_table(w, kStep2Rules.data(), kStep2Rules.size());
  apply_table(w, kStep3Rules.data(), kStep3Rules.size());
  step4(w);
  step5(w);
  return w;
}

}  // namespace rubrictree
