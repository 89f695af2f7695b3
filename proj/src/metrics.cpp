#include "rubrictree/metrics.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "op_fetch.hpp"
#include "rubrictree/errors.hpp"
#include "rubrictree/text.hpp"

namespace rubrictree {

using detail::SchemaIssue;
using nlohmann::json;

StopwordSet load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open stopword file: " + path.string());
  StopwordSet words;
  std::string line;
  while (std::getline(in, line)) {
    auto word = trim(line);
    if (word.empty() || word[0] == '#') continue;
    words.insert(to_lower(word));
  }
  return words;
}

std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      if (!stopwords.count(current)) tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (is_word_char(c))
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c))
                                 : static_cast<char>(c));
    else
      flush();
  }
  flush();
  return tokens;
}

void to_json(json& j, const CorpusStats& s) {
  j = json{{"freq", s.freq}, {"unique_count", s.unique_count}};
}

void from_json(const json& j, CorpusStats& s) {
  j.at("freq").get_to(s.freq);
  j.at("unique_count").get_to(s.unique_count);
}

CorpusStats build_corpus_stats(const std::vector<std::string>& criteria_texts,
                               const StopwordSet& stopwords) {
  CorpusStats stats;
  for (const auto& text : criteria_texts)
    for (const auto& token : tokenize(text, stopwords)) ++stats.freq[token];
  stats.unique_count = stats.freq.size();
  if (stats.unique_count == 0)
    throw EmptyCorpus("no non-stopword tokens in the criteria corpus");
  return stats;
}

double specificity(const std::string& criterion, const CorpusStats& stats,
                   const StopwordSet& stopwords) {
  const double log_corpus = std::log(1.0 + static_cast<double>(stats.unique_count));
  double best = -1.0;
  for (const auto& token : tokenize(criterion, stopwords)) {
    auto it = stats.freq.find(token);
    if (it == stats.freq.end()) continue;
    best = std::max(best, log_corpus / static_cast<double>(it->second));
  }
  if (best < 0.0)
    throw NoScorableTokens("criterion has no token present in the corpus stats");
  return best;
}

double implicitness(const std::string& prompt, const std::string& criterion,
                    const StopwordSet& stopwords, double epsilon) {
  std::set<std::string> criterion_set;
  for (auto& t : tokenize(criterion, stopwords)) criterion_set.insert(std::move(t));
  if (criterion_set.empty()) return 1.0;

  std::set<std::string> prompt_set;
  for (auto& t : tokenize(prompt, stopwords)) prompt_set.insert(std::move(t));

  size_t overlap = 0;
  for (const auto& t : criterion_set)
    if (prompt_set.count(t)) ++overlap;

  double wo = static_cast<double>(overlap) /
              (static_cast<double>(criterion_set.size()) + epsilon);
  return 1.0 - wo;
}

double normalize_human_scores(const std::vector<int>& ratings) {
  if (ratings.empty()) throw OutOfRangeRating("empty ratings list");
  double sum = 0.0;
  for (int v : ratings) {
    if (v < 1 || v > 3)
      throw OutOfRangeRating("rating " + std::to_string(v) + " outside {1,2,3}");
    sum += (v - 1) / 2.0;
  }
  return sum / static_cast<double>(ratings.size());
}

// --- judge-based metrics -------------------------------------------------------

void to_json(json& j, const MatchReport& r) {
  json items = json::array();
  for (const auto& item : r.items) {
    json o{{"criterion", item.criterion},
           {"is_covered", item.is_covered},
           {"comment", item.comment}};
    if (item.is_valuable) o["is_valuable"] = *item.is_valuable;
    items.push_back(std::move(o));
  }
  j = json{{"fraction", r.fraction}, {"items", std::move(items)}};
}

JudgeMetrics::JudgeMetrics(std::shared_ptr<Gateway> gateway, PromptLibrary prompts)
    : gateway_(std::move(gateway)), prompts_(std::move(prompts)) {}

namespace {

std::string statements_json(const std::vector<Criterion>& criteria) {
  json arr = json::array();
  for (const auto& c : criteria) arr.push_back(c.statement);
  return arr.dump(2);
}

// judger prompts answer 'yes'/'no'; accept booleans too
std::optional<bool> parse_yes_no(const json& value) {
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_string()) {
    auto s = to_lower(trim(value.get<std::string>()));
    if (s == "yes" || s == "true") return true;
    if (s == "no" || s == "false") return false;
  }
  return std::nullopt;
}

detail::Checker match_checker(size_t expected, const char* flag_key) {
  return [expected, flag_key](const json& arr) -> std::optional<SchemaIssue> {
    if (arr.size() != expected)
      return SchemaIssue{"expected " + std::to_string(expected) + " items, got " +
                             std::to_string(arr.size()),
                         true};
    for (const auto& item : arr) {
      if (!item.is_object() || !item.contains(flag_key) ||
          !parse_yes_no(item[flag_key]))
        return SchemaIssue{std::string("each item needs '") + flag_key +
                           "' as 'yes' or 'no'"};
    }
    return std::nullopt;
  };
}

}  // namespace

MatchReport JudgeMetrics::coverage(const Question& question,
                                   const std::vector<Criterion>& generated,
                                   const std::vector<Criterion>& expert) {
  if (expert.empty())
    throw EmptyReferenceSet("coverage needs a non-empty expert criteria set");
  auto prompt = prompts_.render("coverage_judger",
                                {{"question", question.transcript()},
                                 {"expert_criteria", statements_json(expert)},
                                 {"model_criteria", statements_json(generated)}});
  auto arr = detail::fetch_array(
      *gateway_, gateway_->make_request(prompt, "coverage_judger"),
      "expert_criteria", match_checker(expert.size(), "is_covered"));

  MatchReport report;
  size_t covered = 0;
  for (size_t i = 0; i < expert.size(); ++i) {
    MatchItem item;
    item.criterion = arr[i].value("criterion", expert[i].statement);
    item.is_covered = *parse_yes_no(arr[i]["is_covered"]);
    item.comment = arr[i].value("comment", "");
    if (item.is_covered) ++covered;
    report.items.push_back(std::move(item));
  }
  report.fraction = static_cast<double>(covered) / static_cast<double>(expert.size());
  return report;
}

MatchReport JudgeMetrics::uniqueness(const Question& question,
                                     const std::vector<Criterion>& generated,
                                     const std::vector<Criterion>& expert) {
  if (generated.empty())
    throw EmptyGeneratedSet("uniqueness needs a non-empty generated criteria set");
  auto prompt = prompts_.render("uniqueness_judger",
                                {{"question", question.transcript()},
                                 {"expert_criteria", statements_json(expert)},
                                 {"model_criteria", statements_json(generated)}});
  auto arr = detail::fetch_array(
      *gateway_, gateway_->make_request(prompt, "uniqueness_judger"), "criteria",
      match_checker(generated.size(), "is_covered"));

  MatchReport report;
  size_t uncovered = 0;
  for (size_t i = 0; i < generated.size(); ++i) {
    MatchItem item;
    item.criterion = arr[i].value("criterion", generated[i].statement);
    item.is_covered = *parse_yes_no(arr[i]["is_covered"]);
    item.comment = arr[i].value("reason", "");
    if (arr[i].contains("is_valuable"))
      item.is_valuable = parse_yes_no(arr[i]["is_valuable"]);
    if (!item.is_covered) ++uncovered;
    report.items.push_back(std::move(item));
  }
  report.fraction =
      static_cast<double>(uncovered) / static_cast<double>(generated.size());
  return report;
}

}  // namespace rubrictree
