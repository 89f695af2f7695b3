#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "rubrictree/core.hpp"
#include "rubrictree/gateway.hpp"
#include "rubrictree/prompts.hpp"

namespace rubrictree {

/// Expansion widths and stage toggles. w1/w2/w3 are the number of horizontal
/// expansion rounds at the scenario/perspective/criteria level.
struct RetConfig {
  int w1 = 3;
  int w2 = 4;
  int w3 = 3;
  bool enable_review = true;
  bool enable_polarity_and_scoring = true;
};

/// Builds the three-level expansion tree (scenarios -> perspectives ->
/// criteria) for one question by orchestrating the prompt operators over the
/// gateway. Individual operators are thread-safe; run concurrent build_world
/// calls on separate engine instances (sharing one gateway) so each tree's
/// event log stays isolated.
class RetEngine {
public:
  RetEngine(std::shared_ptr<Gateway> gateway, PromptLibrary prompts);

  std::vector<ScenarioNode> init_scenarios(const Question& question);

  /// Horizontal expansion: one prompt carrying the full current sibling set;
  /// returns only genuinely new nodes (dedup on case-folded name/statement).
  std::vector<ScenarioNode> expand_horizontal(const Question& question,
                                              const std::vector<ScenarioNode>& current,
                                              int round);
  std::vector<PerspectiveNode> expand_horizontal(const Question& question,
                                                 const std::vector<PerspectiveNode>& current,
                                                 int round);
  std::vector<Criterion> expand_horizontal(const Question& question,
                                           const std::vector<Criterion>& current,
                                           int round);

  /// Hierarchical decomposition one level down. Children carry parent
  /// provenance.
  std::vector<PerspectiveNode> expand_hierarchical(const Question& question,
                                                   const ScenarioNode& scenario);
  std::vector<Criterion> expand_hierarchical(const Question& question,
                                             const PerspectiveNode& perspective);

  /// enabled=false bypasses the reviewer and returns the input unchanged.
  std::vector<PerspectiveNode> review_perspectives(const Question& question,
                                                   const std::vector<PerspectiveNode>& all,
                                                   bool enabled = true);
  std::vector<Criterion> consolidate_criteria(const Question& question,
                                              const std::vector<Criterion>& all,
                                              bool enabled = true);

  /// Classifies each criterion as positive/negative and reconciles the sign
  /// of its points with the flag (flag wins; flips are logged). Returns the
  /// flags, in input order.
  std::vector<bool> classify_polarity(const Question& question,
                                      std::vector<Criterion>& criteria);

  /// Reviews point magnitudes. Signs and statements never change: an
  /// adjustment that flips the sign is rejected and logged, magnitudes are
  /// clamped into [1,10].
  std::vector<Criterion> assign_scores(const Question& question,
                                       const std::vector<Criterion>& criteria);

  /// Full pipeline: init, w1 horizontal rounds at level 1, decomposition to
  /// perspectives, w2 rounds, perspective review, decomposition to criteria,
  /// w3 rounds, consolidation, polarity check, score assignment.
  ExpansionTree build_world(const Question& question, const RetConfig& config);

  /// Reconciliation warnings and rejected-item violations, in call order.
  std::vector<std::string> events() const;
  void clear_events();

private:
  struct PerspectiveResult {
    std::vector<PerspectiveNode> nodes;
    std::vector<std::string> events;
  };
  struct CriteriaResult {
    std::vector<Criterion> criteria;
    std::vector<std::string> events;
  };
  // event-returning variants used by the parallel fan-out so logs stay in
  // sibling order
  PerspectiveResult decompose_scenario_impl(const Question& question,
                                            const ScenarioNode& scenario);
  CriteriaResult generate_criteria_impl(const Question& question,
                                        const PerspectiveNode& perspective);
  void log(std::string event);

  std::shared_ptr<Gateway> gateway_;
  PromptLibrary prompts_;
  mutable std::mutex events_mutex_;
  std::vector<std::string> events_;
};

}  // namespace rubrictree
