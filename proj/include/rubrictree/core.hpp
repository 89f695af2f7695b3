#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rubrictree {

/// One conversation turn.
struct Turn {
  std::string role;
  std::string text;

  bool operator==(const Turn&) const = default;
};

/// Where in the tree a criterion came from.
struct Provenance {
  std::string scenario;
  std::string perspective;

  bool operator==(const Provenance&) const = default;
};

/// A binary, verifiable requirement on an answer. Positive points reward
/// desired content; negative points penalize harmful content. A judge that
/// finds a negative criterion "met" is confirming the bad behavior is
/// present, so the (negative) points are awarded.
struct Criterion {
  std::string statement;
  int points = 0;  // valid range [-10,-1] U [1,10]
  std::vector<std::string> tags;
  std::string reasoning;
  std::optional<Provenance> provenance;

  bool operator==(const Criterion&) const = default;
};

/// One evaluation prompt, possibly multi-turn, with optional expert
/// reference criteria.
struct Question {
  std::string id;
  std::vector<Turn> turns;
  std::vector<Criterion> expert_criteria;
  std::map<std::string, std::string> metadata;

  /// Role-labelled rendering used when the question is embedded in a prompt.
  std::string transcript() const;

  /// Turn texts joined by newlines, no role labels. Used by lexical metrics.
  std::string plain_text() const;

  bool operator==(const Question&) const = default;
};

/// origin_round 0 = produced by the initial analyzer; k >= 1 = produced by
/// horizontal expansion round k.
struct ScenarioNode {
  std::string name;
  std::string description;
  int origin_round = 0;

  bool operator==(const ScenarioNode&) const = default;
};

struct PerspectiveNode {
  std::string name;
  std::string description;
  int origin_round = 0;
  /// Parent scenario name. Empty only when the reviewer merged material
  /// across scenarios (consolidated == true).
  std::optional<std::string> scenario;
  bool consolidated = false;

  bool operator==(const PerspectiveNode&) const = default;
};

/// One operator invocation, as recorded in the tree trace.
struct TraceEntry {
  std::string op;
  int level = 0;
  int round = 0;
  size_t input_count = 0;
  size_t output_count = 0;

  bool operator==(const TraceEntry&) const = default;
};

/// Three-level expansion result for one question: scenarios, perspectives,
/// criteria, plus the operator trace and any reconciliation events.
struct ExpansionTree {
  std::string question_id;
  std::vector<ScenarioNode> scenarios;
  std::vector<PerspectiveNode> perspectives;
  std::vector<Criterion> criteria;
  std::vector<TraceEntry> trace;
  std::vector<std::string> events;

  bool operator==(const ExpansionTree&) const = default;
};

/// One judge verdict for (answer, criterion).
struct Judgment {
  size_t criterion_index = 0;
  bool met = false;
  int awarded = 0;  // points if met, else 0
  std::string rationale;
  bool judge_failed = false;  // verdict unavailable, scored 0 (fail-neutral)

  bool operator==(const Judgment&) const = default;
};

struct ScoreReport {
  long long raw_sum = 0;
  long long positive_total = 0;
  double normalized = 0.0;          // raw_sum / positive_total, may be negative
  double normalized_clamped = 0.0;  // clamped into [0,1]
  std::vector<Judgment> judgments;

  bool operator==(const ScoreReport&) const = default;
};

/// index refers to the offending criterion; npos-style SIZE_MAX marks a
/// set-level violation.
struct Violation {
  size_t index = 0;
  std::string message;

  bool operator==(const Violation&) const = default;
};

inline constexpr size_t kSetViolation = static_cast<size_t>(-1);

/// Empty result iff every criterion invariant holds and at least one
/// criterion has positive points (the normalization denominator).
std::vector<Violation> validate_criteria_set(const std::vector<Criterion>& criteria);

/// Question invariants: non-empty id, non-empty turns, expert criteria all
/// carry non-zero points.
std::vector<Violation> validate_question(const Question& q);

// JSON round-trips. Criterion uses the canonical
// {"criterion","points","reasoning"} shape plus optional "tags"/"provenance".
void to_json(nlohmann::json& j, const Turn& t);
void from_json(const nlohmann::json& j, Turn& t);
void to_json(nlohmann::json& j, const Criterion& c);
void from_json(const nlohmann::json& j, Criterion& c);
void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);
void to_json(nlohmann::json& j, const ScenarioNode& n);
void from_json(const nlohmann::json& j, ScenarioNode& n);
void to_json(nlohmann::json& j, const PerspectiveNode& n);
void from_json(const nlohmann::json& j, PerspectiveNode& n);
void to_json(nlohmann::json& j, const TraceEntry& e);
void from_json(const nlohmann::json& j, TraceEntry& e);
void to_json(nlohmann::json& j, const ExpansionTree& t);
void from_json(const nlohmann::json& j, ExpansionTree& t);
void to_json(nlohmann::json& j, const Judgment& jm);
void from_json(const nlohmann::json& j, Judgment& jm);
void to_json(nlohmann::json& j, const ScoreReport& r);
void from_json(const nlohmann::json& j, ScoreReport& r);

}  // namespace rubrictree
