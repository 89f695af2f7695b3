#include "rubrictree/core.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

namespace rubrictree {

using nlohmann::json;

std::string Question::transcript() const {
  std::string out;
  for (const auto& t : turns) {
    if (!out.empty()) out += "\n\n";
    out += t.role;
    out += ": ";
    out += t.text;
  }
  return out;
}

std::string Question::plain_text() const {
  std::string out;
  for (const auto& t : turns) {
    if (!out.empty()) out += "\n";
    out += t.text;
  }
  return out;
}

std::vector<Violation> validate_criteria_set(const std::vector<Criterion>& criteria) {
  std::vector<Violation> report;
  bool any_positive = false;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const Criterion& c = criteria[i];
    if (c.statement.empty()) report.push_back({i, "empty statement"});
    if (c.points == 0) report.push_back({i, "zero weight"});
    if (std::abs(c.points) > 10) report.push_back({i, "weight out of range"});
    if (c.points > 0) any_positive = true;
  }
  if (!any_positive) report.push_back({kSetViolation, "no positive criterion"});
  return report;
}

std::vector<Violation> validate_question(const Question& q) {
  std::vector<Violation> report;
  if (q.id.empty()) report.push_back({kSetViolation, "empty id"});
  if (q.turns.empty()) report.push_back({kSetViolation, "no turns"});
  for (size_t i = 0; i < q.expert_criteria.size(); ++i) {
    if (q.expert_criteria[i].points == 0)
      report.push_back({i, "expert criterion with zero points"});
  }
  return report;
}

void to_json(json& j, const Turn& t) { j = json{{"role", t.role}, {"text", t.text}}; }

void from_json(const json& j, Turn& t) {
  j.at("role").get_to(t.role);
  j.at("text").get_to(t.text);
}

void to_json(json& j, const Criterion& c) {
  j = json{{"criterion", c.statement}, {"points", c.points}, {"reasoning", c.reasoning}};
  if (!c.tags.empty()) j["tags"] = c.tags;
  if (c.provenance) {
    j["provenance"] = json{{"scenario", c.provenance->scenario},
                           {"perspective", c.provenance->perspective}};
  }
}

void from_json(const json& j, Criterion& c) {
  j.at("criterion").get_to(c.statement);
  j.at("points").get_to(c.points);
  c.reasoning = j.value("reasoning", "");
  c.tags = j.value("tags", std::vector<std::string>{});
  c.provenance.reset();
  if (j.contains("provenance") && !j["provenance"].is_null()) {
    Provenance p;
    j["provenance"].at("scenario").get_to(p.scenario);
    j["provenance"].at("perspective").get_to(p.perspective);
    c.provenance = std::move(p);
  }
}

void to_json(json& j, const Question& q) {
  j = json{{"id", q.id}, {"turns", q.turns}};
  if (!q.expert_criteria.empty()) j["expert_criteria"] = q.expert_criteria;
  if (!q.metadata.empty()) j["metadata"] = q.metadata;
}

void from_json(const json& j, Question& q) {
  j.at("id").get_to(q.id);
  j.at("turns").get_to(q.turns);
  q.expert_criteria = j.value("expert_criteria", std::vector<Criterion>{});
  q.metadata = j.value("metadata", std::map<std::string, std::string>{});
}

namespace {

std::string origin_string(int round) {
  return round == 0 ? "initial" : "horizontal-round-" + std::to_string(round);
}

int origin_round_from(const std::string& s) {
  if (s == "initial") return 0;
  constexpr const char* prefix = "horizontal-round-";
  if (s.rfind(prefix, 0) == 0) return std::atoi(s.c_str() + std::string(prefix).size());
  throw json::other_error::create(501, "unknown origin '" + s + "'", nullptr);
}

}  // namespace

void to_json(json& j, const ScenarioNode& n) {
  j = json{{"name", n.name},
           {"description", n.description},
           {"origin", origin_string(n.origin_round)}};
}

void from_json(const json& j, ScenarioNode& n) {
  j.at("name").get_to(n.name);
  j.at("description").get_to(n.description);
  n.origin_round = origin_round_from(j.value("origin", "initial"));
}

void to_json(json& j, const PerspectiveNode& n) {
  j = json{{"name", n.name},
           {"description", n.description},
           {"origin", origin_string(n.origin_round)}};
  if (n.scenario) j["scenario"] = *n.scenario;
  if (n.consolidated) j["consolidated"] = true;
}

void from_json(const json& j, PerspectiveNode& n) {
  j.at("name").get_to(n.name);
  j.at("description").get_to(n.description);
  n.origin_round = origin_round_from(j.value("origin", "initial"));
  n.scenario.reset();
  if (j.contains("scenario")) n.scenario = j["scenario"].get<std::string>();
  n.consolidated = j.value("consolidated", false);
}

void to_json(json& j, const TraceEntry& e) {
  j = json{{"op", e.op},
           {"level", e.level},
           {"round", e.round},
           {"input_count", e.input_count},
           {"output_count", e.output_count}};
}

void from_json(const json& j, TraceEntry& e) {
  j.at("op").get_to(e.op);
  j.at("level").get_to(e.level);
  j.at("round").get_to(e.round);
  j.at("input_count").get_to(e.input_count);
  j.at("output_count").get_to(e.output_count);
}

void to_json(json& j, const ExpansionTree& t) {
  j = json{{"question_id", t.question_id},
           {"scenarios", t.scenarios},
           {"perspectives", t.perspectives},
           {"criteria", t.criteria},
           {"trace", t.trace},
           {"events", t.events}};
}

void from_json(const json& j, ExpansionTree& t) {
  j.at("question_id").get_to(t.question_id);
  j.at("scenarios").get_to(t.scenarios);
  j.at("perspectives").get_to(t.perspectives);
  j.at("criteria").get_to(t.criteria);
  t.trace = j.value("trace", std::vector<TraceEntry>{});
  t.events = j.value("events", std::vector<std::string>{});
}

void to_json(json& j, const Judgment& jm) {
  j = json{{"criterion_index", jm.criterion_index},
           {"met", jm.met},
           {"awarded", jm.awarded},
           {"rationale", jm.rationale}};
  if (jm.judge_failed) j["judge_failed"] = true;
}

void from_json(const json& j, Judgment& jm) {
  j.at("criterion_index").get_to(jm.criterion_index);
  j.at("met").get_to(jm.met);
  j.at("awarded").get_to(jm.awarded);
  jm.rationale = j.value("rationale", "");
  jm.judge_failed = j.value("judge_failed", false);
}

void to_json(json& j, const ScoreReport& r) {
  j = json{{"raw_sum", r.raw_sum},
           {"positive_total", r.positive_total},
           {"normalized", r.normalized},
           {"normalized_clamped", r.normalized_clamped},
           {"judgments", r.judgments}};
}

void from_json(const json& j, ScoreReport& r) {
  j.at("raw_sum").get_to(r.raw_sum);
  j.at("positive_total").get_to(r.positive_total);
  j.at("normalized").get_to(r.normalized);
  j.at("normalized_clamped").get_to(r.normalized_clamped);
  j.at("judgments").get_to(r.judgments);
}

}  // namespace rubrictree
