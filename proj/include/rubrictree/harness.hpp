#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubrictree/config.hpp"
#include "rubrictree/core.hpp"

namespace rubrictree {

/// runs/<run_id>/{manifest.json, trees/, scores/, metrics/, taxonomy/, cache/}
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path trees() const { return root / "trees"; }
  std::filesystem::path scores() const { return root / "scores"; }
  std::filesystem::path metrics() const { return root / "metrics"; }
  std::filesystem::path taxonomy() const { return root / "taxonomy"; }
  std::filesystem::path cache() const { return root / "cache"; }
  std::filesystem::path tree_file(const std::string& qid) const {
    return trees() / (qid + ".json");
  }
  std::filesystem::path score_file(const std::string& qid, const std::string& model) const {
    return scores() / (qid + "." + model + ".json");
  }
};

/// Per-question lifecycle. Transitions are monotone within one invocation:
/// pending -> generated -> scored, or -> failed. A resumed run resets failed
/// questions to pending for retry.
enum class QuestionStatus { pending, generated, scored, failed };

std::string to_string(QuestionStatus s);
QuestionStatus status_from_string(const std::string& s);

struct RunManifest {
  std::string run_id;
  nlohmann::json config_snapshot;  // frozen at run creation
  std::string dataset_file;        // basename, informational
  std::string dataset_sha256;
  std::string created_at;
  std::string updated_at;
  std::map<std::string, QuestionStatus> status;

  void set_status(const std::string& qid, QuestionStatus next);

  static RunManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Line-delimited JSON, one question per line. Throws ParseError (with line
/// number) and DuplicateId. An empty file yields an empty list.
std::vector<Question> load_dataset(const std::filesystem::path& path);

struct Answer {
  std::string question_id;
  std::string model;
  std::string text;
};

/// Line-delimited JSON: {"question_id","model","answer"}.
std::vector<Answer> load_answers(const std::filesystem::path& path);

struct RunSummary {
  size_t processed = 0;
  size_t skipped = 0;
  size_t failed = 0;
  std::vector<std::string> warnings;

  bool ok() const { return failed == 0; }
};

/// Batch orchestration over a run directory: criteria generation, scoring,
/// quality metrics, and taxonomy induction, with resumability and per-item
/// failure isolation.
class Harness {
public:
  using Clock = std::function<std::string()>;  // ISO-8601 UTC timestamp

  /// backend_override replaces the configured backend; tests use it to
  /// observe provider traffic across resumed runs.
  explicit Harness(AppConfig config, Clock clock = nullptr,
                   std::shared_ptr<Backend> backend_override = nullptr);

  /// build_world per question, checkpointed through the run's completion
  /// cache; per-question failures isolated. Questions whose tree file already
  /// exists are skipped.
  RunSummary run_generate(const RunPaths& run, const std::filesystem::path& dataset);

  /// Scores every answer against its question's generated criteria; writes
  /// one report per (question, model) plus summary.csv and leaderboard.csv.
  RunSummary run_score(const RunPaths& run, const std::filesystem::path& answers_file);

  /// Coverage/uniqueness (judge) and specificity/implicitness (deterministic)
  /// per question. Expert criteria come from the questions stored with each
  /// tree, or from a sidecar dataset in the same line-JSON format when given.
  /// Questions without expert criteria are skipped with a flag.
  RunSummary run_metrics(const RunPaths& run,
                         const std::optional<std::filesystem::path>& expert_source = {});

  /// Tag graph -> communities -> representatives; with a dimension map also
  /// emits the per-dimension capability matrix from the run's scores.
  RunSummary run_taxonomy(const RunPaths& run,
                          const std::optional<std::filesystem::path>& dimension_map);

  /// Consolidated text summary of everything present in the run directory.
  std::string report(const RunPaths& run) const;

  const AppConfig& config() const { return config_; }

private:
  nlohmann::json config_snapshot(const std::string& dataset_file,
                                 const std::string& dataset_hash) const;
  RunManifest open_or_create_manifest(const RunPaths& run,
                                      const std::filesystem::path& dataset,
                                      const std::vector<Question>& questions);
  GatewayConfig gateway_config_for(const RunPaths& run) const;
  std::shared_ptr<Gateway> make_gateway(const RunPaths& run) const;

  AppConfig config_;
  Clock clock_;
  std::shared_ptr<Backend> backend_override_;
};

}  // namespace rubrictree
