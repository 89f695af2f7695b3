#include "rubrictree/ret.hpp"

#include <cmath>
#include <functional>
#include <future>
#include <optional>
#include <set>
#include <unordered_set>

#include "op_fetch.hpp"
#include "rubrictree/errors.hpp"
#include "rubrictree/text.hpp"

namespace rubrictree {

using detail::Checker;
using detail::SchemaIssue;
using detail::fetch_array;
using nlohmann::json;

namespace {

json scenario_json(const ScenarioNode& n) {
  return json{{"scenario_name", n.name}, {"scenario_description", n.description}};
}

json perspective_json(const PerspectiveNode& n) {
  return json{{"perspective_name", n.name}, {"perspective_description", n.description}};
}

json criterion_json(const Criterion& c) {
  return json{{"criterion", c.statement}, {"points", c.points}, {"reasoning", c.reasoning}};
}

template <typename T, typename Fn>
std::string dump_list(const std::vector<T>& items, Fn to_json_fn) {
  json arr = json::array();
  for (const auto& item : items) arr.push_back(to_json_fn(item));
  return arr.dump(2);
}

/// Requires each item to be an object carrying a non-empty name and a
/// description under the given keys.
std::optional<SchemaIssue> check_named_nodes(const json& arr, const char* name_key,
                                             const char* desc_key) {
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains(name_key) || !item.contains(desc_key) ||
        !item[name_key].is_string() || !item[desc_key].is_string() ||
        trim(item[name_key].get<std::string>()).empty())
      return SchemaIssue{std::string("each item needs non-empty '") + name_key +
                         "' and '" + desc_key + "'"};
  }
  return std::nullopt;
}

std::optional<SchemaIssue> check_criterion_items(const json& arr) {
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("criterion") || !item.contains("points") ||
        !item.contains("reasoning") || !item["criterion"].is_string() ||
        !item["points"].is_number())
      return SchemaIssue{"each item needs 'criterion' (string), 'points' (integer) "
                         "and 'reasoning'"};
  }
  return std::nullopt;
}

/// Points parsed out of model output: integral values only, never zero,
/// magnitude clamped into [1,10]. Returns nullopt (with a violation message)
/// for values that cannot be repaired by clamping.
std::optional<int> parse_points(const json& value, const std::string& statement,
                                std::vector<std::string>& events) {
  double raw = value.get<double>();
  if (raw != std::floor(raw)) {
    events.push_back("rejected criterion '" + statement + "': fractional weight " +
                     value.dump());
    return std::nullopt;
  }
  int points = static_cast<int>(raw);
  if (points == 0) {
    events.push_back("rejected criterion '" + statement + "': zero weight");
    return std::nullopt;
  }
  if (points > 10 || points < -10) {
    int clamped = points > 0 ? 10 : -10;
    events.push_back("clamped weight of '" + statement + "' from " +
                     std::to_string(points) + " to " + std::to_string(clamped));
    points = clamped;
  }
  return points;
}

}  // namespace

RetEngine::RetEngine(std::shared_ptr<Gateway> gateway, PromptLibrary prompts)
    : gateway_(std::move(gateway)), prompts_(std::move(prompts)) {}

void RetEngine::log(std::string event) {
  std::lock_guard lock(events_mutex_);
  events_.push_back(std::move(event));
}

std::vector<std::string> RetEngine::events() const {
  std::lock_guard lock(events_mutex_);
  return events_;
}

void RetEngine::clear_events() {
  std::lock_guard lock(events_mutex_);
  events_.clear();
}

// --- scenarios ---------------------------------------------------------------

namespace {

struct ScenarioParse {
  std::vector<ScenarioNode> nodes;
  std::vector<std::string> events;
};

ScenarioParse parse_scenarios(const json& arr, int origin_round,
                              const std::set<std::string>& existing) {
  ScenarioParse out;
  std::set<std::string> seen = existing;
  for (const auto& item : arr) {
    ScenarioNode node;
    node.name = trim(item["scenario_name"].get<std::string>());
    node.description = trim(item["scenario_description"].get<std::string>());
    node.origin_round = origin_round;
    auto key = dedup_key(node.name);
    if (!seen.insert(key).second) {
      out.events.push_back("dropped duplicate scenario '" + node.name + "'");
      continue;
    }
    out.nodes.push_back(std::move(node));
  }
  return out;
}

}  // namespace

std::vector<ScenarioNode> RetEngine::init_scenarios(const Question& question) {
  auto prompt = prompts_.render("scenario_analyzer",
                                {{"question", question.transcript()}});
  auto arr = fetch_array(*gateway_, gateway_->make_request(prompt, "init_scenarios"),
                         "scenarios",
                         [](const json& a) { return check_named_nodes(a, "scenario_name", "scenario_description"); });
  auto parsed = parse_scenarios(arr, 0, {});
  for (auto& e : parsed.events) log(std::move(e));
  if (parsed.nodes.empty())
    throw EmptyExpansion("scenario analyzer produced no scenarios");
  return parsed.nodes;
}

std::vector<ScenarioNode> RetEngine::expand_horizontal(
    const Question& question, const std::vector<ScenarioNode>& current, int round) {
  auto prompt = prompts_.render(
      "scenario_expander",
      {{"question", question.transcript()},
       {"scenarios", dump_list(current, scenario_json)}});
  auto arr = fetch_array(*gateway_,
                         gateway_->make_request(prompt, "expand_scenarios"),
                         "scenarios",
                         [](const json& a) { return check_named_nodes(a, "scenario_name", "scenario_description"); });
  std::set<std::string> existing;
  for (const auto& n : current) existing.insert(dedup_key(n.name));
  auto parsed = parse_scenarios(arr, round, existing);
  for (auto& e : parsed.events) log(std::move(e));
  return parsed.nodes;
}

// --- perspectives ------------------------------------------------------------

namespace {

struct PerspectiveParse {
  std::vector<PerspectiveNode> nodes;
  std::vector<std::string> events;
};

PerspectiveParse parse_perspectives(const json& arr, int origin_round,
                                    const std::set<std::string>& existing) {
  PerspectiveParse out;
  std::set<std::string> seen = existing;
  for (const auto& item : arr) {
    PerspectiveNode node;
    node.name = trim(item["perspective_name"].get<std::string>());
    node.description = trim(item["perspective_description"].get<std::string>());
    node.origin_round = origin_round;
    auto key = dedup_key(node.name);
    if (!seen.insert(key).second) {
      out.events.push_back("dropped duplicate perspective '" + node.name + "'");
      continue;
    }
    out.nodes.push_back(std::move(node));
  }
  return out;
}

Checker perspective_checker() {
  return [](const json& a) {
    return check_named_nodes(a, "perspective_name", "perspective_description");
  };
}

}  // namespace

RetEngine::PerspectiveResult RetEngine::decompose_scenario_impl(
    const Question& question, const ScenarioNode& scenario) {
  auto prompt = prompts_.render(
      "perspective_analyzer",
      {{"question", question.transcript()},
       {"scenario_analysis", scenario_json(scenario).dump(2)}});
  auto arr = fetch_array(*gateway_,
                         gateway_->make_request(prompt, "decompose_scenario"),
                         "perspectives", perspective_checker());
  auto parsed = parse_perspectives(arr, 0, {});
  for (auto& node : parsed.nodes) node.scenario = scenario.name;
  if (parsed.nodes.empty())
    throw EmptyExpansion("perspective analyzer produced no perspectives for scenario '" +
                         scenario.name + "'");
  return {std::move(parsed.nodes), std::move(parsed.events)};
}

std::vector<PerspectiveNode> RetEngine::expand_hierarchical(const Question& question,
                                                            const ScenarioNode& scenario) {
  auto result = decompose_scenario_impl(question, scenario);
  for (auto& e : result.events) log(std::move(e));
  return result.nodes;
}

std::vector<PerspectiveNode> RetEngine::expand_horizontal(
    const Question& question, const std::vector<PerspectiveNode>& current, int round) {
  auto prompt = prompts_.render(
      "perspective_expander",
      {{"question", question.transcript()},
       {"perspectives", dump_list(current, perspective_json)}});
  auto arr = fetch_array(*gateway_,
                         gateway_->make_request(prompt, "expand_perspectives"),
                         "perspectives", perspective_checker());
  std::set<std::string> existing;
  for (const auto& n : current) existing.insert(dedup_key(n.name));
  auto parsed = parse_perspectives(arr, round, existing);
  // gap-filling nodes are not tied to a single scenario
  for (auto& node : parsed.nodes) node.consolidated = true;
  for (auto& e : parsed.events) log(std::move(e));
  return parsed.nodes;
}

std::vector<PerspectiveNode> RetEngine::review_perspectives(
    const Question& question, const std::vector<PerspectiveNode>& all, bool enabled) {
  if (!enabled) return all;
  auto prompt = prompts_.render(
      "perspective_reviewer",
      {{"question", question.transcript()},
       {"all_perspectives", dump_list(all, perspective_json)}});
  auto arr = fetch_array(*gateway_,
                         gateway_->make_request(prompt, "review_perspectives"),
                         "perspectives", perspective_checker());
  auto parsed = parse_perspectives(arr, 0, {});
  for (auto& e : parsed.events) log(std::move(e));
  if (parsed.nodes.empty())
    throw EmptyExpansion("perspective reviewer removed every perspective");

  // keep parentage for survivors; anything new or merged is cross-scenario
  std::map<std::string, const PerspectiveNode*> by_key;
  for (const auto& n : all) by_key.emplace(dedup_key(n.name), &n);
  for (auto& node : parsed.nodes) {
    auto it = by_key.find(dedup_key(node.name));
    if (it != by_key.end()) {
      node.scenario = it->second->scenario;
      node.origin_round = it->second->origin_round;
      node.consolidated = it->second->consolidated;
    } else {
      node.consolidated = true;
    }
  }
  return parsed.nodes;
}

// --- criteria ----------------------------------------------------------------

namespace {

struct CriteriaParse {
  std::vector<Criterion> criteria;
  std::vector<std::string> events;
};

CriteriaParse parse_criteria(const json& arr, const std::set<std::string>& existing) {
  CriteriaParse out;
  std::set<std::string> seen = existing;
  for (const auto& item : arr) {
    Criterion c;
    c.statement = trim(item["criterion"].get<std::string>());
    if (c.statement.empty()) {
      out.events.push_back("rejected criterion with empty statement");
      continue;
    }
    auto points = parse_points(item["points"], c.statement, out.events);
    if (!points) continue;
    c.points = *points;
    c.reasoning = item["reasoning"].is_string() ? item["reasoning"].get<std::string>()
                                                : item["reasoning"].dump();
    if (item.contains("tags") && item["tags"].is_array()) {
      for (const auto& t : item["tags"])
        if (t.is_string()) c.tags.push_back(t.get<std::string>());
    }
    auto key = dedup_key(c.statement);
    if (!seen.insert(key).second) {
      out.events.push_back("dropped duplicate criterion '" + c.statement + "'");
      continue;
    }
    out.criteria.push_back(std::move(c));
  }
  return out;
}

}  // namespace

RetEngine::CriteriaResult RetEngine::generate_criteria_impl(
    const Question& question, const PerspectiveNode& perspective) {
  auto prompt = prompts_.render(
      "criteria_generator",
      {{"question", question.transcript()},
       {"perspective_description", perspective.name + ": " + perspective.description}});
  auto arr = fetch_array(*gateway_,
                         gateway_->make_request(prompt, "generate_criteria"),
                         "criteria", check_criterion_items);
  auto parsed = parse_criteria(arr, {});
  for (auto& c : parsed.criteria)
    c.provenance = Provenance{perspective.scenario.value_or(""), perspective.name};
  if (parsed.criteria.empty())
    throw EmptyExpansion("criteria generator produced no criteria for perspective '" +
                         perspective.name + "'");
  return {std::move(parsed.criteria), std::move(parsed.events)};
}

std::vector<Criterion> RetEngine::expand_hierarchical(const Question& question,
                                                      const PerspectiveNode& perspective) {
  auto result = generate_criteria_impl(question, perspective);
  for (auto& e : result.events) log(std::move(e));
  return result.criteria;
}

std::vector<Criterion> RetEngine::expand_horizontal(const Question& question,
                                                    const std::vector<Criterion>& current,
                                                    int round) {
  (void)round;  // criteria carry provenance, not an origin round
  auto prompt = prompts_.render(
      "criteria_expander",
      {{"question", question.transcript()},
       {"all_criteria", dump_list(current, criterion_json)}});
  auto arr = fetch_array(*gateway_,
                         gateway_->make_request(prompt, "expand_criteria"),
                         "criteria", check_criterion_items);
  std::set<std::string> existing;
  for (const auto& c : current) existing.insert(dedup_key(c.statement));
  auto parsed = parse_criteria(arr, existing);
  for (auto& e : parsed.events) log(std::move(e));
  return parsed.criteria;
}

std::vector<Criterion> RetEngine::consolidate_criteria(const Question& question,
                                                       const std::vector<Criterion>& all,
                                                       bool enabled) {
  if (!enabled) return all;
  auto prompt = prompts_.render(
      "criteria_reviewer",
      {{"question", question.transcript()},
       {"all_criteria", dump_list(all, criterion_json)}});
  auto arr = fetch_array(*gateway_,
                         gateway_->make_request(prompt, "consolidate_criteria"),
                         "criteria", check_criterion_items);
  auto parsed = parse_criteria(arr, {});
  for (auto& e : parsed.events) log(std::move(e));
  if (parsed.criteria.empty())
    throw EmptyExpansion("criteria reviewer removed every criterion");

  std::map<std::string, const Criterion*> by_key;
  for (const auto& c : all) by_key.emplace(dedup_key(c.statement), &c);
  for (auto& c : parsed.criteria) {
    auto it = by_key.find(dedup_key(c.statement));
    if (it != by_key.end()) {
      c.provenance = it->second->provenance;
      if (c.tags.empty()) c.tags = it->second->tags;
    }
  }

  auto violations = validate_criteria_set(parsed.criteria);
  if (!violations.empty()) {
    std::string detail;
    for (const auto& v : violations)
      detail += (detail.empty() ? "" : "; ") + v.message;
    throw ConsolidationInvalid("consolidated criteria fail validation: " + detail);
  }
  return parsed.criteria;
}

std::vector<bool> RetEngine::classify_polarity(const Question& question,
                                               std::vector<Criterion>& criteria) {
  auto prompt = prompts_.render(
      "negative_checker",
      {{"question", question.transcript()},
       {"all_criteria", dump_list(criteria, criterion_json)}});
  const size_t n = criteria.size();
  auto arr = fetch_array(
      *gateway_, gateway_->make_request(prompt, "classify_polarity"), "criteria",
      [n](const json& a) -> std::optional<SchemaIssue> {
        if (a.size() != n)
          return SchemaIssue{"expected " + std::to_string(n) + " polarity flags, got " +
                                 std::to_string(a.size()),
                             true};
        for (const auto& item : a)
          if (!item.is_object() || !item.contains("positive") ||
              !item["positive"].is_boolean())
            return SchemaIssue{"each item needs a boolean 'positive'"};
        return std::nullopt;
      });

  std::vector<bool> flags;
  flags.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    bool positive = arr[i]["positive"].get<bool>();
    flags.push_back(positive);
    bool sign_positive = criteria[i].points > 0;
    if (positive != sign_positive) {
      int before = criteria[i].points;
      criteria[i].points = -criteria[i].points;
      log("polarity reconciled for '" + criteria[i].statement + "': " +
          std::to_string(before) + " -> " + std::to_string(criteria[i].points));
    }
  }
  return flags;
}

std::vector<Criterion> RetEngine::assign_scores(const Question& question,
                                                const std::vector<Criterion>& criteria) {
  auto prompt = prompts_.render(
      "score_assigner",
      {{"question", question.transcript()},
       {"all_criteria", dump_list(criteria, criterion_json)}});
  const size_t n = criteria.size();
  auto arr = fetch_array(
      *gateway_, gateway_->make_request(prompt, "assign_scores"), "criteria",
      [n](const json& a) -> std::optional<SchemaIssue> {
        if (a.size() != n)
          return SchemaIssue{"expected " + std::to_string(n) + " scored criteria, got " +
                                 std::to_string(a.size()),
                             true};
        for (const auto& item : a)
          if (!item.is_object() || !item.contains("points") ||
              !item["points"].is_number())
            return SchemaIssue{"each item needs numeric 'points'"};
        return std::nullopt;
      });

  std::vector<Criterion> out = criteria;
  for (size_t i = 0; i < n; ++i) {
    double raw = arr[i]["points"].get<double>();
    if (raw != std::floor(raw)) {
      log("score adjustment for '" + out[i].statement + "' rejected: fractional value " +
          arr[i]["points"].dump());
      continue;
    }
    int adjusted = static_cast<int>(raw);
    bool was_positive = out[i].points > 0;
    if (adjusted == 0 || (adjusted > 0) != was_positive) {
      log("score adjustment for '" + out[i].statement + "' rejected: would flip sign (" +
          std::to_string(out[i].points) + " -> " + std::to_string(adjusted) + ")");
      continue;
    }
    if (adjusted > 10 || adjusted < -10) {
      int clamped = adjusted > 0 ? 10 : -10;
      log("score adjustment for '" + out[i].statement + "' clamped: " +
          std::to_string(adjusted) + " -> " + std::to_string(clamped));
      adjusted = clamped;
    }
    out[i].points = adjusted;
  }
  return out;
}

// --- full pipeline -----------------------------------------------------------

namespace {

template <typename Fn>
auto with_context(const std::string& op, int level, int round, Fn&& fn)
    -> decltype(fn()) {
  const std::string ctx =
      "[" + op + " level=" + std::to_string(level) + " round=" + std::to_string(round) + "] ";
  try {
    return fn();
  } catch (const EmptyExpansion& e) {
    throw EmptyExpansion(ctx + e.what());
  } catch (const LengthMismatch& e) {
    throw LengthMismatch(ctx + e.what());
  } catch (const ConsolidationInvalid& e) {
    throw ConsolidationInvalid(ctx + e.what());
  } catch (const MissingKeys& e) {
    throw MissingKeys(ctx + e.what());
  } catch (const MalformedOutput& e) {
    throw MalformedOutput(ctx + e.what());
  } catch (const MockScriptMiss& e) {
    throw MockScriptMiss(ctx + e.what());
  } catch (const AuthFailure& e) {
    throw AuthFailure(ctx + e.what());
  } catch (const TimeoutError& e) {
    throw TimeoutError(ctx + e.what());
  } catch (const ProviderUnavailable& e) {
    throw ProviderUnavailable(ctx + e.what());
  }
}

}  // namespace

ExpansionTree RetEngine::build_world(const Question& question, const RetConfig& config) {
  if (auto problems = validate_question(question); !problems.empty())
    throw ConfigError("invalid question '" + question.id + "': " + problems.front().message);

  ExpansionTree tree;
  tree.question_id = question.id;
  const size_t events_before = events().size();

  // level 1
  tree.scenarios = with_context("init_scenarios", 1, 0,
                                [&] { return init_scenarios(question); });
  tree.trace.push_back({"init_scenarios", 1, 0, 0, tree.scenarios.size()});

  for (int t = 1; t <= config.w1; ++t) {
    size_t before = tree.scenarios.size();
    auto fresh = with_context("expand_horizontal", 1, t,
                              [&] { return expand_horizontal(question, tree.scenarios, t); });
    tree.scenarios.insert(tree.scenarios.end(), fresh.begin(), fresh.end());
    tree.trace.push_back({"expand_horizontal", 1, t, before, fresh.size()});
  }

  // level 1 -> 2, sibling decompositions in parallel under the gateway limit;
  // results and events are merged in sibling order to keep output deterministic
  {
    std::vector<std::future<PerspectiveResult>> futures;
    futures.reserve(tree.scenarios.size());
    for (const auto& scenario : tree.scenarios) {
      futures.push_back(std::async(std::launch::async, [this, &question, &scenario] {
        return decompose_scenario_impl(question, scenario);
      }));
    }
    std::set<std::string> seen;
    for (size_t i = 0; i < futures.size(); ++i) {
      auto result = with_context("expand_hierarchical", 1, 0,
                                 [&] { return futures[i].get(); });
      for (auto& e : result.events) log(std::move(e));
      size_t kept = 0;
      for (auto& child : result.nodes) {
        if (!seen.insert(dedup_key(child.name)).second) {
          log("dropped duplicate perspective '" + child.name + "' from scenario '" +
              tree.scenarios[i].name + "'");
          continue;
        }
        tree.perspectives.push_back(std::move(child));
        ++kept;
      }
      tree.trace.push_back({"expand_hierarchical", 1, 0, 1, kept});
    }
  }

  for (int t = 1; t <= config.w2; ++t) {
    size_t before = tree.perspectives.size();
    auto fresh = with_context("expand_horizontal", 2, t,
                              [&] { return expand_horizontal(question, tree.perspectives, t); });
    tree.perspectives.insert(tree.perspectives.end(), fresh.begin(), fresh.end());
    tree.trace.push_back({"expand_horizontal", 2, t, before, fresh.size()});
  }

  if (config.enable_review) {
    size_t before = tree.perspectives.size();
    tree.perspectives = with_context("review_perspectives", 2, 0, [&] {
      return review_perspectives(question, tree.perspectives);
    });
    tree.trace.push_back({"review_perspectives", 2, 0, before, tree.perspectives.size()});
  }

  // level 2 -> 3
  {
    std::vector<std::future<CriteriaResult>> futures;
    futures.reserve(tree.perspectives.size());
    for (const auto& perspective : tree.perspectives) {
      futures.push_back(std::async(std::launch::async, [this, &question, &perspective] {
        return generate_criteria_impl(question, perspective);
      }));
    }
    std::set<std::string> seen;
    for (size_t i = 0; i < futures.size(); ++i) {
      auto result = with_context("expand_hierarchical", 2, 0,
                                 [&] { return futures[i].get(); });
      for (auto& e : result.events) log(std::move(e));
      size_t kept = 0;
      for (auto& child : result.criteria) {
        if (!seen.insert(dedup_key(child.statement)).second) {
          log("dropped duplicate criterion '" + child.statement + "' from perspective '" +
              tree.perspectives[i].name + "'");
          continue;
        }
        tree.criteria.push_back(std::move(child));
        ++kept;
      }
      tree.trace.push_back({"expand_hierarchical", 2, 0, 1, kept});
    }
  }

  for (int t = 1; t <= config.w3; ++t) {
    size_t before = tree.criteria.size();
    auto fresh = with_context("expand_horizontal", 3, t,
                              [&] { return expand_horizontal(question, tree.criteria, t); });
    tree.criteria.insert(tree.criteria.end(), fresh.begin(), fresh.end());
    tree.trace.push_back({"expand_horizontal", 3, t, before, fresh.size()});
  }

  if (config.enable_review) {
    size_t before = tree.criteria.size();
    tree.criteria = with_context("consolidate_criteria", 3, 0, [&] {
      return consolidate_criteria(question, tree.criteria);
    });
    tree.trace.push_back({"consolidate_criteria", 3, 0, before, tree.criteria.size()});
  }

  if (config.enable_polarity_and_scoring) {
    with_context("classify_polarity", 3, 0,
                 [&] { return classify_polarity(question, tree.criteria); });
    tree.trace.push_back({"classify_polarity", 3, 0, tree.criteria.size(),
                          tree.criteria.size()});
    tree.criteria = with_context("assign_scores", 3, 0,
                                 [&] { return assign_scores(question, tree.criteria); });
    tree.trace.push_back({"assign_scores", 3, 0, tree.criteria.size(),
                          tree.criteria.size()});
  }

  // provenance must name a perspective that survived (or the pool)
  std::set<std::string> names;
  for (const auto& p : tree.perspectives) names.insert(p.name);
  for (auto& c : tree.criteria) {
    if (c.provenance && !names.count(c.provenance->perspective)) {
      log("criterion '" + c.statement + "' provenance perspective '" +
          c.provenance->perspective + "' was consolidated away; moved to pool");
      c.provenance.reset();
    }
  }

  auto all_events = events();
  tree.events.assign(all_events.begin() + static_cast<long>(events_before),
                     all_events.end());
  return tree;
}

}  // namespace rubrictree
