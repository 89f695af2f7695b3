#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rubrictree/core.hpp"
#include "rubrictree/gateway.hpp"
#include "rubrictree/prompts.hpp"

namespace rubrictree {

struct Totals {
  long long raw_sum = 0;
  long long positive_total = 0;
};

struct Normalized {
  double value = 0.0;    // raw_sum / positive_total, may be negative
  double clamped = 0.0;  // min(1, max(0, value))
};

/// raw_sum = sum of awarded points; positive_total = sum of positive
/// weights. Lengths must match (LengthMismatch).
Totals aggregate(const std::vector<Judgment>& judgments,
                 const std::vector<Criterion>& criteria);

/// Throws ZeroDenominator when positive_total == 0 (normally blocked by
/// criteria-set validation).
Normalized normalize(long long raw_sum, long long positive_total);

struct ScorerConfig {
  /// One judge call for the whole criteria set instead of one per criterion.
  /// Per-criterion is the default: verdicts stay isolated and cacheable.
  bool batch_judging = false;
};

/// Judges answers against criteria with an LLM judge and aggregates to the
/// normalized question score. A judge that cannot produce a verdict for a
/// criterion scores it 0 and flags the judgment (fail-neutral) rather than
/// failing the whole answer.
class Scorer {
public:
  Scorer(std::shared_ptr<Gateway> gateway, PromptLibrary prompts,
         ScorerConfig config = {});

  /// For negative criteria met=true means the bad behavior IS present and the
  /// (negative) points are awarded.
  Judgment judge_criterion(const Question& question, const std::string& answer,
                           const Criterion& criterion, size_t criterion_index = 0);

  ScoreReport score_answer(const Question& question, const std::string& answer,
                           const std::vector<Criterion>& criteria);

private:
  std::vector<Judgment> judge_batch(const Question& question, const std::string& answer,
                                    const std::vector<Criterion>& criteria);

  std::shared_ptr<Gateway> gateway_;
  PromptLibrary prompts_;
  ScorerConfig config_;
};

}  // namespace rubrictree
