#include "rubrictree/scorer.hpp"

#include <algorithm>
#include <future>

#include "op_fetch.hpp"
#include "rubrictree/errors.hpp"

namespace rubrictree {

using detail::SchemaIssue;
using nlohmann::json;

Totals aggregate(const std::vector<Judgment>& judgments,
                 const std::vector<Criterion>& criteria) {
  if (judgments.size() != criteria.size())
    throw LengthMismatch("aggregate: " + std::to_string(judgments.size()) +
                         " judgments for " + std::to_string(criteria.size()) +
                         " criteria");
  Totals totals;
  for (const auto& j : judgments) totals.raw_sum += j.awarded;
  for (const auto& c : criteria)
    if (c.points > 0) totals.positive_total += c.points;
  return totals;
}

Normalized normalize(long long raw_sum, long long positive_total) {
  if (positive_total <= 0)
    throw ZeroDenominator("normalize: positive_total must be > 0");
  Normalized n;
  n.value = static_cast<double>(raw_sum) / static_cast<double>(positive_total);
  n.clamped = std::min(1.0, std::max(0.0, n.value));
  return n;
}

Scorer::Scorer(std::shared_ptr<Gateway> gateway, PromptLibrary prompts,
               ScorerConfig config)
    : gateway_(std::move(gateway)), prompts_(std::move(prompts)), config_(config) {}

Judgment Scorer::judge_criterion(const Question& question, const std::string& answer,
                                 const Criterion& criterion, size_t criterion_index) {
  auto prompt = prompts_.render("criterion_judge",
                                {{"question", question.transcript()},
                                 {"answer", answer},
                                 {"criterion", criterion.statement}});
  Judgment judgment;
  judgment.criterion_index = criterion_index;
  try {
    json verdict = gateway_->complete_json(
        gateway_->make_request(prompt, "judge_criterion"), {"met", "explanation"});
    if (!verdict["met"].is_boolean())
      throw MalformedOutput("judge verdict 'met' is not a boolean");
    judgment.met = verdict["met"].get<bool>();
    judgment.awarded = judgment.met ? criterion.points : 0;
    judgment.rationale = verdict["explanation"].is_string()
                             ? verdict["explanation"].get<std::string>()
                             : verdict["explanation"].dump();
    if (judgment.rationale.empty()) judgment.rationale = "(no explanation)";
  } catch (const MalformedOutput& e) {
    judgment = Judgment{criterion_index, false, 0,
                        std::string("judge failure: ") + e.what(), true};
  } catch (const MissingKeys& e) {
    judgment = Judgment{criterion_index, false, 0,
                        std::string("judge failure: ") + e.what(), true};
  }
  return judgment;
}

std::vector<Judgment> Scorer::judge_batch(const Question& question,
                                          const std::string& answer,
                                          const std::vector<Criterion>& criteria) {
  json list = json::array();
  for (const auto& c : criteria) list.push_back(c.statement);
  auto prompt = prompts_.render("criteria_batch_judge",
                                {{"question", question.transcript()},
                                 {"answer", answer},
                                 {"criteria", list.dump(2)}});
  const size_t n = criteria.size();
  auto arr = detail::fetch_array(
      *gateway_, gateway_->make_request(prompt, "judge_batch"), "judgments",
      [n](const json& a) -> std::optional<SchemaIssue> {
        if (a.size() != n)
          return SchemaIssue{"expected " + std::to_string(n) + " judgments, got " +
                                 std::to_string(a.size()),
                             true};
        for (const auto& item : a)
          if (!item.is_object() || !item.contains("met") || !item["met"].is_boolean())
            return SchemaIssue{"each judgment needs a boolean 'met'"};
        return std::nullopt;
      });
  std::vector<Judgment> judgments;
  judgments.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    Judgment j;
    j.criterion_index = i;
    j.met = arr[i]["met"].get<bool>();
    j.awarded = j.met ? criteria[i].points : 0;
    j.rationale = arr[i].value("explanation", "(no explanation)");
    if (j.rationale.empty()) j.rationale = "(no explanation)";
    judgments.push_back(std::move(j));
  }
  return judgments;
}

ScoreReport Scorer::score_answer(const Question& question, const std::string& answer,
                                 const std::vector<Criterion>& criteria) {
  ScoreReport report;
  if (config_.batch_judging) {
    report.judgments = judge_batch(question, answer, criteria);
  } else {
    std::vector<std::future<Judgment>> futures;
    futures.reserve(criteria.size());
    for (size_t i = 0; i < criteria.size(); ++i) {
      futures.push_back(std::async(std::launch::async, [this, &question, &answer,
                                                        &criteria, i] {
        return judge_criterion(question, answer, criteria[i], i);
      }));
    }
    for (auto& f : futures) report.judgments.push_back(f.get());
  }

  Totals totals = aggregate(report.judgments, criteria);
  Normalized n = normalize(totals.raw_sum, totals.positive_total);
  report.raw_sum = totals.raw_sum;
  report.positive_total = totals.positive_total;
  report.normalized = n.value;
  report.normalized_clamped = n.clamped;
  return report;
}

}  // namespace rubrictree
