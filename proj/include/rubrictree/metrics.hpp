#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rubrictree/core.hpp"
#include "rubrictree/gateway.hpp"
#include "rubrictree/prompts.hpp"

namespace rubrictree {

using StopwordSet = std::set<std::string>;

/// Reads one token per line; '#' comments and blank lines ignored.
StopwordSet load_stopwords(const std::filesystem::path& path);

/// Lowercases, splits on non-alphanumeric runs, removes stopwords.
/// Duplicates are preserved; consumers form sets where needed.
std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords);

/// Word-frequency table over a criteria corpus.
struct CorpusStats {
  std::map<std::string, long long> freq;
  size_t unique_count = 0;
};

void to_json(nlohmann::json& j, const CorpusStats& s);
void from_json(const nlohmann::json& j, CorpusStats& s);

/// Throws EmptyCorpus when no non-stopword token survives.
CorpusStats build_corpus_stats(const std::vector<std::string>& criteria_texts,
                               const StopwordSet& stopwords);

/// Normalized inverse word frequency: max over the criterion's tokens of
/// ln(1 + unique_count) / freq[token]. Tokens absent from the stats are
/// skipped; throws NoScorableTokens if none remain.
double specificity(const std::string& criterion, const CorpusStats& stats,
                   const StopwordSet& stopwords);

/// 1 - |tokenset(prompt) ∩ tokenset(criterion)| / (|tokenset(criterion)| + epsilon).
/// A criterion with no non-stopword tokens is defined as fully implicit (1.0).
double implicitness(const std::string& prompt, const std::string& criterion,
                    const StopwordSet& stopwords, double epsilon = 1e-9);

/// Mean of (v - 1) / 2 over ratings in {1,2,3}.
double normalize_human_scores(const std::vector<int>& ratings);

struct MatchItem {
  std::string criterion;
  bool is_covered = false;
  std::string comment;
  std::optional<bool> is_valuable;
};

struct MatchReport {
  std::vector<MatchItem> items;
  double fraction = 0.0;
};

void to_json(nlohmann::json& j, const MatchReport& r);

/// Judge-based coverage and uniqueness. One judge call per question carrying
/// the full criterion lists.
class JudgeMetrics {
public:
  JudgeMetrics(std::shared_ptr<Gateway> gateway, PromptLibrary prompts);

  /// Fraction of expert criteria semantically represented in the generated
  /// set. Throws EmptyReferenceSet when expert is empty.
  MatchReport coverage(const Question& question,
                       const std::vector<Criterion>& generated,
                       const std::vector<Criterion>& expert);

  /// Fraction of generated criteria NOT represented in the expert set.
  /// is_valuable is recorded per item but excluded from the fraction.
  /// Throws EmptyGeneratedSet when generated is empty.
  MatchReport uniqueness(const Question& question,
                         const std::vector<Criterion>& generated,
                         const std::vector<Criterion>& expert);

private:
  std::shared_ptr<Gateway> gateway_;
  PromptLibrary prompts_;
};

}  // namespace rubrictree
