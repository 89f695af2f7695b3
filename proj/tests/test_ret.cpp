#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "rubrictree/errors.hpp"
#include "rubrictree/ret.hpp"
#include "support/helpers.hpp"

using namespace rubrictree;
using nlohmann::json;
using testsupport::make_gateway;
using testsupport::prompts;
using testsupport::simple_question;

namespace {

json scenario_item(const std::string& name, const std::string& desc = "why it matters") {
  return json{{"scenario_name", name}, {"scenario_description", desc}};
}

json perspective_item(const std::string& name, const std::string& desc = "what it checks") {
  return json{{"perspective_name", name}, {"perspective_description", desc}};
}

json criterion_item(const std::string& text, const json& points,
                    bool with_reasoning = true) {
  json item{{"criterion", text}, {"points", points}};
  if (with_reasoning) item["reasoning"] = "because";
  return item;
}

RetEngine engine_with(std::shared_ptr<MockBackend> mock) {
  return RetEngine(make_gateway(std::move(mock)), prompts());
}

}  // namespace

TEST_CASE("init_scenarios parses the analyzer output") {
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default(
      "init_scenarios",
      json{{"scenarios", json::array({scenario_item("A"), scenario_item("B")})}}.dump());
  auto engine = engine_with(mock);
  auto scenarios = engine.init_scenarios(simple_question());
  REQUIRE(scenarios.size() == 2);
  CHECK(scenarios[0].name == "A");
  CHECK(scenarios[0].origin_round == 0);
  CHECK(scenarios[1].name == "B");
}

TEST_CASE("init_scenarios drops case-insensitive duplicate names, first kept") {
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default(
      "init_scenarios",
      json{{"scenarios", json::array({scenario_item("A", "first"),
                                      scenario_item("a", "second")})}}.dump());
  auto engine = engine_with(mock);
  auto scenarios = engine.init_scenarios(simple_question());
  REQUIRE(scenarios.size() == 1);
  CHECK(scenarios[0].description == "first");
  CHECK(engine.events().size() == 1);
}

TEST_CASE("init_scenarios rejects an empty expansion") {
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("init_scenarios", R"({"scenarios": []})");
  auto engine = engine_with(mock);
  CHECK_THROWS_AS(engine.init_scenarios(simple_question()), EmptyExpansion);
}

TEST_CASE("horizontal expansion returns only new nodes") {
  std::vector<ScenarioNode> current = {{"A", "a", 0}, {"B", "b", 0}};
  auto mock = std::make_shared<MockBackend>();
  auto engine = engine_with(mock);

  SUBCASE("new node kept with its round recorded") {
    mock->set_operator_default(
        "expand_scenarios", json{{"scenarios", json::array({scenario_item("C")})}}.dump());
    auto fresh = engine.expand_horizontal(simple_question(), current, 2);
    REQUIRE(fresh.size() == 1);
    CHECK(fresh[0].name == "C");
    CHECK(fresh[0].origin_round == 2);
  }
  SUBCASE("re-emitted existing name is dropped") {
    mock->set_operator_default(
        "expand_scenarios", json{{"scenarios", json::array({scenario_item("B")})}}.dump());
    CHECK(engine.expand_horizontal(simple_question(), current, 1).empty());
  }
}

TEST_CASE("criteria horizontal expansion rejects invalid weights, keeps the rest") {
  std::vector<Criterion> current;
  Criterion existing;
  existing.statement = "Already here";
  existing.points = 5;
  current.push_back(existing);

  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default(
      "expand_criteria",
      json{{"criteria", json::array({criterion_item("Zero weight entry", 0),
                                     criterion_item("Good entry", 7)})}}.dump());
  auto engine = engine_with(mock);
  auto fresh = engine.expand_horizontal(simple_question(), current, 1);
  REQUIRE(fresh.size() == 1);
  CHECK(fresh[0].statement == "Good entry");
  REQUIRE(engine.events().size() == 1);
  CHECK(engine.events()[0].find("zero weight") != std::string::npos);
}

TEST_CASE("fractional weights are rejected at parse time") {
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default(
      "expand_criteria",
      json{{"criteria", json::array({criterion_item("Half points", 4.5),
                                     criterion_item("Whole points", 4.0)})}}.dump());
  auto engine = engine_with(mock);
  auto fresh = engine.expand_horizontal(simple_question(), std::vector<Criterion>{}, 1);
  REQUIRE(fresh.size() == 1);
  CHECK(fresh[0].points == 4);  // integral-valued doubles are fine
  CHECK(engine.events()[0].find("fractional") != std::string::npos);
}

TEST_CASE("scenario decomposition attaches parentage") {
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default(
      "decompose_scenario",
      json{{"perspectives",
            json::array({perspective_item("P1"), perspective_item("P2"),
                         perspective_item("P3"), perspective_item("P4")})}}.dump());
  auto engine = engine_with(mock);
  auto children = engine.expand_hierarchical(simple_question(), ScenarioNode{"S", "d", 0});
  REQUIRE(children.size() == 4);
  for (const auto& p : children) {
    CHECK(p.scenario == "S");
    CHECK(!p.consolidated);
  }
}

TEST_CASE("perspective decomposition yields criteria with provenance") {
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default(
      "generate_criteria",
      json{{"criteria", json::array({criterion_item("C1", 10), criterion_item("C2", 8),
                                     criterion_item("C3", -9)})}}.dump());
  auto engine = engine_with(mock);
  PerspectiveNode perspective{"Safety", "checks safety", 0, "Home", false};
  auto criteria = engine.expand_hierarchical(simple_question(), perspective);
  REQUIRE(criteria.size() == 3);
  CHECK(criteria[0].points == 10);
  CHECK(criteria[2].points == -9);
  for (const auto& c : criteria) {
    REQUIRE(c.provenance.has_value());
    CHECK(c.provenance->scenario == "Home");
    CHECK(c.provenance->perspective == "Safety");
  }
}

TEST_CASE("criterion missing reasoning gets one repair round then MalformedOutput") {
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default(
      "generate_criteria",
      json{{"criteria", json::array({criterion_item("C1", 5, false)})}}.dump());
  auto engine = engine_with(mock);
  PerspectiveNode perspective{"P", "d", 0, std::nullopt, false};
  CHECK_THROWS_AS(engine.expand_hierarchical(simple_question(), perspective),
                  MalformedOutput);
  CHECK(mock->call_count() == 2);  // original + one item repair
}

TEST_CASE("perspective review keeps the reviewer's selection") {
  std::vector<PerspectiveNode> all;
  for (int i = 0; i < 7; ++i)
    all.push_back({"P" + std::to_string(i), "d", 0, "S", false});

  auto mock = std::make_shared<MockBackend>();
  json kept = json::array();
  for (int i = 0; i < 5; ++i) kept.push_back(perspective_item("P" + std::to_string(i)));
  mock->set_operator_default("review_perspectives", json{{"perspectives", kept}}.dump());
  auto engine = engine_with(mock);

  auto reviewed = engine.review_perspectives(simple_question(), all);
  REQUIRE(reviewed.size() == 5);
  // survivors keep their parent scenario
  for (const auto& p : reviewed) CHECK(p.scenario == "S");
}

TEST_CASE("perspective review bypass returns input unchanged") {
  std::vector<PerspectiveNode> all = {{"P", "d", 0, "S", false}};
  auto engine = engine_with(std::make_shared<MockBackend>());
  CHECK(engine.review_perspectives(simple_question(), all, false) == all);
}

TEST_CASE("perspective reviewer may not delete everything") {
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("review_perspectives", R"({"perspectives": []})");
  auto engine = engine_with(mock);
  std::vector<PerspectiveNode> all = {{"P", "d", 0, "S", false}};
  CHECK_THROWS_AS(engine.review_perspectives(simple_question(), all), EmptyExpansion);
}

TEST_CASE("reviewer-merged perspectives are marked cross-scenario") {
  std::vector<PerspectiveNode> all = {{"P0", "d", 0, "S", false},
                                      {"P1", "d", 0, "S", false}};
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default(
      "review_perspectives",
      json{{"perspectives", json::array({perspective_item("Merged view")})}}.dump());
  auto engine = engine_with(mock);
  auto reviewed = engine.review_perspectives(simple_question(), all);
  REQUIRE(reviewed.size() == 1);
  CHECK(reviewed[0].consolidated);
  CHECK(!reviewed[0].scenario.has_value());
}

TEST_CASE("criteria consolidation merges and validates") {
  std::vector<Criterion> all;
  for (int i = 0; i < 12; ++i) {
    Criterion c;
    c.statement = "C" + std::to_string(i);
    c.points = 5;
    c.provenance = Provenance{"S", "P"};
    all.push_back(c);
  }

  SUBCASE("merge 12 -> 9") {
    auto mock = std::make_shared<MockBackend>();
    json merged = json::array();
    for (int i = 0; i < 9; ++i) merged.push_back(criterion_item("C" + std::to_string(i), 5));
    mock->set_operator_default("consolidate_criteria", json{{"criteria", merged}}.dump());
    auto engine = engine_with(mock);
    auto out = engine.consolidate_criteria(simple_question(), all);
    REQUIRE(out.size() == 9);
    // statement-matched survivors keep provenance
    CHECK(out[0].provenance == Provenance{"S", "P"});
  }
  SUBCASE("bypass is identity") {
    auto engine = engine_with(std::make_shared<MockBackend>());
    CHECK(engine.consolidate_criteria(simple_question(), all, false) == all);
  }
  SUBCASE("all-negative output is ConsolidationInvalid") {
    auto mock = std::make_shared<MockBackend>();
    mock->set_operator_default(
        "consolidate_criteria",
        json{{"criteria", json::array({criterion_item("Bad only", -5)})}}.dump());
    auto engine = engine_with(mock);
    CHECK_THROWS_AS(engine.consolidate_criteria(simple_question(), all),
                    ConsolidationInvalid);
  }
}

namespace {

std::vector<Criterion> plain_criteria(std::vector<int> points) {
  std::vector<Criterion> out;
  for (size_t i = 0; i < points.size(); ++i) {
    Criterion c;
    c.statement = "C" + std::to_string(i);
    c.points = points[i];
    out.push_back(c);
  }
  return out;
}

json polarity_response(std::vector<bool> flags) {
  json arr = json::array();
  for (bool f : flags) arr.push_back({{"positive", f}, {"reasoning", "why"}});
  return json{{"criteria", arr}};
}

json scored_response(const std::vector<Criterion>& criteria, std::vector<json> points) {
  json arr = json::array();
  for (size_t i = 0; i < criteria.size(); ++i)
    arr.push_back({{"criterion", criteria[i].statement},
                   {"points", points[i]},
                   {"reasoning", "adjusted"}});
  return json{{"criteria", arr}};
}

}  // namespace

TEST_CASE("classify_polarity reconciles sign with the flag") {
  auto criteria = plain_criteria({5, 7, 6});
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("classify_polarity",
                             polarity_response({true, true, false}).dump());
  auto engine = engine_with(mock);
  auto flags = engine.classify_polarity(simple_question(), criteria);
  CHECK(flags == std::vector<bool>{true, true, false});
  CHECK(criteria[0].points == 5);
  CHECK(criteria[1].points == 7);
  CHECK(criteria[2].points == -6);
  REQUIRE(engine.events().size() == 1);
  CHECK(engine.events()[0].find("polarity reconciled") != std::string::npos);
}

TEST_CASE("classify_polarity is identity when flags match signs") {
  auto criteria = plain_criteria({5, -7});
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("classify_polarity",
                             polarity_response({true, false}).dump());
  auto engine = engine_with(mock);
  engine.classify_polarity(simple_question(), criteria);
  CHECK(criteria[0].points == 5);
  CHECK(criteria[1].points == -7);
  CHECK(engine.events().empty());
}

TEST_CASE("classify_polarity length contract") {
  auto criteria = plain_criteria({5, 7, 6});
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("classify_polarity", polarity_response({true, false}).dump());
  auto engine = engine_with(mock);
  CHECK_THROWS_AS(engine.classify_polarity(simple_question(), criteria), LengthMismatch);
  CHECK(mock->call_count() == 2);  // one repair attempt
}

TEST_CASE("assign_scores adjusts magnitude within bounds") {
  auto criteria = plain_criteria({5});
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("assign_scores", scored_response(criteria, {8}).dump());
  auto engine = engine_with(mock);
  auto out = engine.assign_scores(simple_question(), criteria);
  CHECK(out[0].points == 8);
  CHECK(out[0].statement == criteria[0].statement);
}

TEST_CASE("assign_scores rejects sign flips") {
  auto criteria = plain_criteria({-6});
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("assign_scores", scored_response(criteria, {6}).dump());
  auto engine = engine_with(mock);
  auto out = engine.assign_scores(simple_question(), criteria);
  CHECK(out[0].points == -6);
  REQUIRE(!engine.events().empty());
  CHECK(engine.events()[0].find("flip sign") != std::string::npos);
}

TEST_CASE("assign_scores clamps out-of-range magnitudes") {
  auto criteria = plain_criteria({5});
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("assign_scores", scored_response(criteria, {12}).dump());
  auto engine = engine_with(mock);
  auto out = engine.assign_scores(simple_question(), criteria);
  CHECK(out[0].points == 10);
  REQUIRE(!engine.events().empty());
  CHECK(engine.events()[0].find("clamped") != std::string::npos);
}

TEST_CASE("assign_scores length contract") {
  auto criteria = plain_criteria({5, 7});
  auto mock = std::make_shared<MockBackend>();
  mock->set_operator_default("assign_scores", scored_response({criteria[0]}, {8}).dump());
  auto engine = engine_with(mock);
  CHECK_THROWS_AS(engine.assign_scores(simple_question(), criteria), LengthMismatch);
}

// --- full pipeline ---------------------------------------------------------

TEST_CASE("build_world counting fixture: 3 scenarios, 7 perspectives, 14 criteria") {
  auto script = testsupport::world_fixture_script();
  auto mock = std::make_shared<MockBackend>(script);
  auto engine = engine_with(mock);
  RetConfig config{1, 1, 0, false, false};

  auto tree = engine.build_world(simple_question(), config);
  CHECK(tree.scenarios.size() == 3);
  CHECK(tree.perspectives.size() == 7);
  CHECK(tree.criteria.size() == 14);

  SUBCASE("trace records every operator call") {
    // init + 1 horizontal + 3 decompositions + 1 horizontal + 7 decompositions
    CHECK(tree.trace.size() == 13);
    CHECK(tree.trace[0].op == "init_scenarios");
    for (const auto& entry : tree.trace)
      if (entry.op == "expand_horizontal") CHECK(entry.round == 1);
  }

  SUBCASE("criteria provenance names an existing perspective") {
    std::set<std::string> names;
    for (const auto& p : tree.perspectives) names.insert(p.name);
    for (const auto& c : tree.criteria) {
      REQUIRE(c.provenance.has_value());
      CHECK(names.count(c.provenance->perspective) == 1);
    }
  }
}

TEST_CASE("build_world is reproducible byte-for-byte under a fixed mock") {
  auto script = testsupport::world_fixture_script();
  RetConfig config{1, 1, 0, false, false};

  auto engine1 = engine_with(std::make_shared<MockBackend>(script));
  auto engine2 = engine_with(std::make_shared<MockBackend>(script));
  auto tree1 = engine1.build_world(simple_question(), config);
  auto tree2 = engine2.build_world(simple_question(), config);
  CHECK(json(tree1).dump(2) == json(tree2).dump(2));
}

TEST_CASE("build_world with zero widths and reviews off is pure tree decomposition") {
  auto script = testsupport::world_fixture_script();
  auto mock = std::make_shared<MockBackend>(script);
  auto engine = engine_with(mock);
  RetConfig config{0, 0, 0, false, false};

  auto tree = engine.build_world(simple_question(), config);
  CHECK(tree.scenarios.size() == 2);     // no horizontal rounds
  CHECK(tree.perspectives.size() == 4);  // 2 scenarios x 2
  CHECK(tree.criteria.size() == 8);      // 4 perspectives x 2

  // criteria equal the union of the per-perspective generator outputs
  std::set<std::string> statements;
  for (const auto& c : tree.criteria) statements.insert(c.statement);
  for (const auto& p : tree.perspectives) {
    CHECK(statements.count("Covers " + p.name + " essentials") == 1);
    CHECK(statements.count("Provides misleading " + p.name + " guidance") == 1);
  }
}

TEST_CASE("build_world annotates operator failures with level and round") {
  auto script = testsupport::world_fixture_script();
  script["**Role**: Scenario expander"] = "not json at all";
  auto engine = engine_with(std::make_shared<MockBackend>(script));
  RetConfig config{1, 1, 0, false, false};
  try {
    engine.build_world(simple_question(), config);
    FAIL("expected MalformedOutput");
  } catch (const MalformedOutput& e) {
    std::string message = e.what();
    CHECK(message.find("level=1") != std::string::npos);
    CHECK(message.find("round=1") != std::string::npos);
  }
}

TEST_CASE("build_world runs polarity and scoring when enabled") {
  auto script = testsupport::world_fixture_script();

  // 14 criteria arrive ordered (positive, negative) per perspective; flags
  // match signs, then the assigner raises every positive 8 -> 9
  json flags = json::array();
  for (int i = 0; i < 14; ++i) flags.push_back({{"positive", i % 2 == 0}});
  script["Criterion polarity classifier"] = json{{"criteria", flags}}.dump();

  std::vector<std::string> perspectives = {"HC Safety",       "HC Practicality",
                                           "OW Safety",       "OW Practicality",
                                           "TR Safety",       "TR Practicality",
                                           "Equity"};
  json adjusted = json::array();
  for (const auto& p : perspectives) {
    adjusted.push_back({{"criterion", "Covers " + p + " essentials"},
                        {"points", 9},
                        {"reasoning", "raised"}});
    adjusted.push_back({{"criterion", "Provides misleading " + p + " guidance"},
                        {"points", -6},
                        {"reasoning", "kept"}});
  }
  script["Score reasonableness and importance checker"] =
      json{{"criteria", adjusted}}.dump();

  auto engine = engine_with(std::make_shared<MockBackend>(script));
  RetConfig config{1, 1, 0, false, true};
  auto tree = engine.build_world(simple_question(), config);
  REQUIRE(tree.criteria.size() == 14);
  for (size_t i = 0; i < tree.criteria.size(); ++i)
    CHECK(tree.criteria[i].points == (i % 2 == 0 ? 9 : -6));
}
