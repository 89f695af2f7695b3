// Shared test fixtures: scripted backends, temp directories, and the
// independent oracles the expected values are frozen from.
#pragma once

#include <unistd.h>

#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubrictree/core.hpp"
#include "rubrictree/gateway.hpp"
#include "rubrictree/prompts.hpp"
#include "rubrictree/taxonomy.hpp"

namespace testsupport {

inline std::filesystem::path asset_dir() { return RUBRICTREE_ASSET_DIR; }
inline std::filesystem::path fixture_dir() { return RUBRICTREE_FIXTURE_DIR; }

inline rubrictree::PromptLibrary prompts() {
  return rubrictree::PromptLibrary::load(asset_dir() / "prompts");
}

inline rubrictree::Question simple_question(const std::string& id = "q1") {
  rubrictree::Question q;
  q.id = id;
  q.turns.push_back({"user", "How should I treat a mild heat rash on my neck?"});
  return q;
}

inline std::shared_ptr<rubrictree::Gateway> make_gateway(
    std::shared_ptr<rubrictree::Backend> backend, rubrictree::GatewayConfig config = {}) {
  config.backend = "mock";
  config.backoff_base_ms = 1;  // fast retries in tests
  return std::make_shared<rubrictree::Gateway>(config, std::move(backend));
}

/// Unique temp directory, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& label) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rubrictree-" + label + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

// --- oracles -------------------------------------------------------------------

/// Brute-force recomputation of the normalized score straight from the
/// definition: sum awarded over sum of positive weights.
inline double normalize_oracle(const std::vector<int>& weights,
                               const std::vector<bool>& met) {
  double raw = 0.0;
  double positive = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (met[i]) raw += weights[i];
    if (weights[i] > 0) positive += weights[i];
  }
  return raw / positive;
}

/// All set partitions of {0..n-1} via restricted growth strings.
inline std::vector<std::vector<std::vector<size_t>>> all_partitions(size_t n) {
  std::vector<std::vector<std::vector<size_t>>> result;
  std::vector<size_t> assignment(n, 0);
  std::function<void(size_t, size_t)> recurse = [&](size_t i, size_t max_used) {
    if (i == n) {
      std::vector<std::vector<size_t>> partition(max_used);
      for (size_t k = 0; k < n; ++k) partition[assignment[k]].push_back(k);
      result.push_back(std::move(partition));
      return;
    }
    for (size_t c = 0; c <= max_used; ++c) {
      assignment[i] = c;
      recurse(i + 1, c == max_used ? max_used + 1 : max_used);
    }
  };
  recurse(0, 0);
  return result;
}

/// Exhaustive modularity maximization over every partition (feasible for
/// the <= 8 node suite graphs).
inline std::pair<double, std::vector<std::vector<std::string>>> best_partition_oracle(
    const rubrictree::TagGraph& graph) {
  double best_q = -2.0;
  std::vector<std::vector<std::string>> best;
  for (const auto& partition : all_partitions(graph.nodes.size())) {
    std::vector<std::vector<std::string>> named;
    for (const auto& block : partition) {
      std::vector<std::string> tags;
      for (size_t idx : block) tags.push_back(graph.nodes[idx].tag);
      std::sort(tags.begin(), tags.end());
      named.push_back(std::move(tags));
    }
    std::sort(named.begin(), named.end());
    double q = rubrictree::modularity(graph, named);
    if (q > best_q) {
      best_q = q;
      best = std::move(named);
    }
  }
  return {best_q, best};
}

/// Edit distance by the full DP table, kept separate from the two-row
/// implementation under test.
inline size_t edit_distance_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<size_t>> d(a.size() + 1, std::vector<size_t>(b.size() + 1));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (size_t i = 1; i <= a.size(); ++i)
    for (size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

// --- scripted pipeline fixture ---------------------------------------------------

/// Mock script producing the counting fixture: 2 initial scenarios, one new
/// node per horizontal round, fan-outs 2 perspectives per scenario and 2
/// criteria per perspective. With w1=1, w2=1, w3=0 and reviews off this
/// yields 3 scenarios, 7 perspectives, 14 criteria.
inline nlohmann::json world_fixture_script() {
  using nlohmann::json;
  json script = json::object();

  auto scenario = [](const std::string& name) {
    return json{{"scenario_name", name},
                {"scenario_description", "Context where " + name + " changes what good means."}};
  };
  auto perspective = [](const std::string& name) {
    return json{{"perspective_name", name},
                {"perspective_description", "Evaluates " + name + " quality aspects."}};
  };
  auto criterion = [](const std::string& text, int points, json tags) {
    return json{{"criterion", text},
                {"points", points},
                {"reasoning", "Matters for this scenario."},
                {"tags", std::move(tags)}};
  };

  script["**Role**: Scenario analyzer"] =
      json{{"scenarios", json::array({scenario("Home Care"), scenario("Outdoor Work")})}}
          .dump();
  script["**Role**: Scenario expander"] =
      json{{"scenarios", json::array({scenario("Travel")})}}.dump();

  // keyed on the analyzer's single-object rendering (2-space indent), which
  // never appears inside the expander's array rendering (4-space indent)
  const std::vector<std::pair<std::string, std::string>> fanout = {
      {"Home Care", "HC"}, {"Outdoor Work", "OW"}, {"Travel", "TR"}};
  for (const auto& [scenario_name, prefix] : fanout) {
    script["\n  \"scenario_name\": \"" + scenario_name + "\""] =
        json{{"perspectives", json::array({perspective(prefix + " Safety"),
                                           perspective(prefix + " Practicality")})}}
            .dump();
  }
  script["**Role**: Perspective expander"] =
      json{{"perspectives", json::array({perspective("Equity")})}}.dump();

  const std::vector<std::string> perspectives = {
      "HC Safety",  "HC Practicality", "OW Safety", "OW Practicality",
      "TR Safety",  "TR Practicality", "Equity"};
  for (const auto& name : perspectives) {
    json tags1 = json::array({"safety", "risk"});
    json tags2 = json::array({"practicality"});
    if (name == "Equity") {
      tags1 = json::array({"equity"});
      tags2 = json::array({"fairness", "equitable"});
    }
    script["focus perspective " + name] =
        json{{"criteria",
              json::array({criterion("Covers " + name + " essentials", 8, tags1),
                           criterion("Provides misleading " + name + " guidance", -6,
                                     tags2)})}}
            .dump();
  }
  return script;
}

// --- harness fixture ---------------------------------------------------------

/// Minimal generation script: one scenario, two perspectives, four criteria
/// per question (weights 9, 5, 8, -6; positive total 22). Role-keyed, so it
/// serves every question in a dataset.
inline nlohmann::json harness_fixture_script() {
  using nlohmann::json;
  json script = json::object();
  script["@init_scenarios"] =
      json{{"scenarios", json::array({json{{"scenario_name", "Core"},
                                           {"scenario_description",
                                            "The question taken at face value."}}})}}
          .dump();
  script["@decompose_scenario"] =
      json{{"perspectives",
            json::array({json{{"perspective_name", "Accuracy"},
                              {"perspective_description", "Checks factual quality."}},
                         json{{"perspective_name", "Safety"},
                              {"perspective_description", "Checks harm avoidance."}}})}}
          .dump();
  script["focus perspective Accuracy"] =
      json{{"criteria",
            json::array(
                {json{{"criterion", "States the correct primary answer"},
                      {"points", 9},
                      {"reasoning", "core"},
                      {"tags", json::array({"accuracy"})}},
                 json{{"criterion", "Cites supporting evidence"},
                      {"points", 5},
                      {"reasoning", "quality"},
                      {"tags", json::array({"evidence"})}}})}}
          .dump();
  script["focus perspective Safety"] =
      json{{"criteria",
            json::array(
                {json{{"criterion", "Flags emergency warning signs"},
                      {"points", 8},
                      {"reasoning", "safety"},
                      {"tags", json::array({"safety", "risks"})}},
                 json{{"criterion", "Recommends a harmful home remedy"},
                      {"points", -6},
                      {"reasoning", "harm"},
                      {"tags", json::array({"risk"})}}})}}
          .dump();
  return script;
}

/// Statements produced by harness_fixture_script, in generation order.
inline std::vector<std::string> harness_fixture_statements() {
  return {"States the correct primary answer", "Cites supporting evidence",
          "Flags emergency warning signs", "Recommends a harmful home remedy"};
}

/// Scripted verdict for one (answer, criterion) pair. The key spans the
/// contiguous answer+criterion block of the judge prompt.
inline void add_judge_verdict(nlohmann::json& script, const std::string& answer,
                              const std::string& criterion, bool met) {
  script["Candidate Answer:\n" + answer + "\n\nCriterion:\n" + criterion] =
      nlohmann::json{{"met", met}, {"explanation", met ? "present" : "absent"}}.dump();
}

/// Verdicts for all four fixture criteria against one answer.
inline void add_judged_answer(nlohmann::json& script, const std::string& answer,
                              const std::array<bool, 4>& met) {
  auto statements = harness_fixture_statements();
  for (size_t i = 0; i < statements.size(); ++i)
    add_judge_verdict(script, answer, statements[i], met[i]);
}

/// Coverage judger entry for one question: marks `covered` of the expert
/// statements as covered.
inline void add_coverage_verdict(nlohmann::json& script,
                                 const rubrictree::Question& question,
                                 const std::vector<std::string>& expert,
                                 const std::set<std::string>& covered) {
  using nlohmann::json;
  json items = json::array();
  for (const auto& e : expert)
    items.push_back({{"criterion", e},
                     {"is_covered", covered.count(e) ? "yes" : "no"},
                     {"comment", "checked"}});
  script["Original Scenario: " + question.transcript() +
         "\n\nExpert Criteria (array):"] = json{{"expert_criteria", items}}.dump();
}

inline void add_uniqueness_verdict(nlohmann::json& script,
                                   const rubrictree::Question& question,
                                   const std::vector<std::string>& generated,
                                   const std::set<std::string>& covered) {
  using nlohmann::json;
  json items = json::array();
  for (const auto& g : generated)
    items.push_back({{"criterion", g},
                     {"is_covered", covered.count(g) ? "yes" : "no"},
                     {"is_valuable", "yes"},
                     {"reason", "checked"}});
  script["Original Scenario: " + question.transcript() + "\n\nExpert Criteria:"] =
      json{{"criteria", items}}.dump();
}

/// Fixed-time clock for byte-identical manifests.
inline std::string fixed_clock() { return "2026-01-01T00:00:00Z"; }

inline std::string question_line(const std::string& id, const std::string& text,
                                 const std::vector<std::pair<std::string, int>>& expert = {}) {
  using nlohmann::json;
  json q{{"id", id}, {"turns", json::array({json{{"role", "user"}, {"text", text}}})}};
  if (!expert.empty()) {
    json list = json::array();
    for (const auto& [criterion, points] : expert)
      list.push_back({{"criterion", criterion}, {"points", points}, {"reasoning", ""}});
    q["expert_criteria"] = list;
  }
  return q.dump();
}

inline std::string answer_line(const std::string& qid, const std::string& model,
                               const std::string& answer) {
  return nlohmann::json{{"question_id", qid}, {"model", model}, {"answer", answer}}
      .dump();
}

}  // namespace testsupport
