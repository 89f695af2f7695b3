#include "rubrictree/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "rubrictree/errors.hpp"
#include "rubrictree/hashing.hpp"
#include "rubrictree/metrics.hpp"
#include "rubrictree/prompts.hpp"
#include "rubrictree/scorer.hpp"
#include "rubrictree/taxonomy.hpp"
#include "rubrictree/text.hpp"

namespace rubrictree {

using nlohmann::json;

namespace {

std::string iso_now() {
  std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::filesystem::path& path, const json& value) {
  write_text_atomic(path, value.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  json value;
  in >> value;
  return value;
}

// tasks swallow their own exceptions; this only distributes indices
void parallel_for(size_t count, int workers, const std::function<void(size_t)>& fn) {
  if (count == 0) return;
  size_t w = std::min<size_t>(static_cast<size_t>(std::max(workers, 1)), count);
  if (w <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (size_t t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

std::string sanitize_for_filename(const std::string& name) {
  std::string out;
  out.reserve(name.size());
  for (unsigned char c : name) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.')
      out.push_back(static_cast<char>(c));
    else
      out.push_back('_');
  }
  return out;
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

}  // namespace

std::string to_string(QuestionStatus s) {
  switch (s) {
    case QuestionStatus::pending: return "pending";
    case QuestionStatus::generated: return "generated";
    case QuestionStatus::scored: return "scored";
    case QuestionStatus::failed: return "failed";
  }
  return "pending";
}

QuestionStatus status_from_string(const std::string& s) {
  if (s == "pending") return QuestionStatus::pending;
  if (s == "generated") return QuestionStatus::generated;
  if (s == "scored") return QuestionStatus::scored;
  if (s == "failed") return QuestionStatus::failed;
  throw Error("unknown question status '" + s + "'");
}

void RunManifest::set_status(const std::string& qid, QuestionStatus next) {
  auto it = status.find(qid);
  if (it == status.end()) throw Error("unknown question id in manifest: " + qid);
  if (next == QuestionStatus::failed) {
    it->second = next;
    return;
  }
  // monotone within an invocation
  if (static_cast<int>(next) < static_cast<int>(it->second) &&
      it->second != QuestionStatus::failed)
    throw Error("status of " + qid + " cannot move from " + to_string(it->second) +
                " back to " + to_string(next));
  it->second = next;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  json j = read_json(path);
  RunManifest m;
  j.at("run_id").get_to(m.run_id);
  m.config_snapshot = j.at("config");
  m.dataset_file = j.at("dataset").at("file").get<std::string>();
  m.dataset_sha256 = j.at("dataset").at("sha256").get<std::string>();
  j.at("created_at").get_to(m.created_at);
  j.at("updated_at").get_to(m.updated_at);
  for (const auto& [qid, s] : j.at("status").items())
    m.status[qid] = status_from_string(s.get<std::string>());
  return m;
}

void RunManifest::save(const std::filesystem::path& path) const {
  json statuses = json::object();
  for (const auto& [qid, s] : status) statuses[qid] = to_string(s);
  json j{{"run_id", run_id},
         {"config", config_snapshot},
         {"dataset", {{"file", dataset_file}, {"sha256", dataset_sha256}}},
         {"created_at", created_at},
         {"updated_at", updated_at},
         {"status", std::move(statuses)}};
  write_json_atomic(path, j);
}

std::vector<Question> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset: " + path.string());

  std::vector<Question> questions;
  std::set<std::string> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed JSON", line_no);
    Question q;
    try {
      q = j.get<Question>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad question record: ") + e.what(), line_no);
    }
    if (auto problems = validate_question(q); !problems.empty())
      throw ParseError("invalid question '" + q.id + "': " + problems.front().message,
                       line_no);
    if (!ids.insert(q.id).second)
      throw DuplicateId("duplicate question id '" + q.id + "' at line " +
                        std::to_string(line_no));
    questions.push_back(std::move(q));
  }
  return questions;
}

std::vector<Answer> load_answers(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open answers file: " + path.string());

  std::vector<Answer> answers;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed JSON", line_no);
    Answer a;
    try {
      a.question_id = j.at("question_id").get<std::string>();
      a.model = j.at("model").get<std::string>();
      a.text = j.at("answer").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad answer record: ") + e.what(), line_no);
    }
    if (a.question_id.empty() || a.model.empty())
      throw ParseError("answer record needs non-empty question_id and model", line_no);
    answers.push_back(std::move(a));
  }
  return answers;
}

// --- Harness -------------------------------------------------------------------

Harness::Harness(AppConfig config, Clock clock, std::shared_ptr<Backend> backend_override)
    : config_(std::move(config)), clock_(clock ? std::move(clock) : Clock(iso_now)),
      backend_override_(std::move(backend_override)) {}

GatewayConfig Harness::gateway_config_for(const RunPaths& run) const {
  GatewayConfig gc = config_.gateway;
  if (gc.cache_dir.empty()) gc.cache_dir = run.cache().string();
  return gc;
}

std::shared_ptr<Gateway> Harness::make_gateway(const RunPaths& run) const {
  auto gc = gateway_config_for(run);
  if (backend_override_) return std::make_shared<Gateway>(gc, backend_override_);
  return Gateway::from_config(gc);
}

json Harness::config_snapshot(const std::string& dataset_file,
                              const std::string& dataset_hash) const {
  PromptLibrary prompts = PromptLibrary::load(config_.harness.prompt_dir);
  json snapshot;
  snapshot["gateway"] = {{"backend", config_.gateway.backend},
                         {"model", config_.gateway.model},
                         {"temperature", config_.gateway.temperature},
                         {"max_tokens", config_.gateway.max_tokens}};
  snapshot["ret"] = {{"w1", config_.ret.w1},
                     {"w2", config_.ret.w2},
                     {"w3", config_.ret.w3},
                     {"enable_review", config_.ret.enable_review},
                     {"enable_polarity_and_scoring", config_.ret.enable_polarity_and_scoring}};
  snapshot["metrics"] = {{"epsilon", config_.metrics.epsilon}};
  snapshot["taxonomy"] = {{"threshold", config_.taxonomy.threshold}};
  snapshot["prompts_sha256"] = prompts.hashes();
  snapshot["stopwords_sha256"] = sha256_file_hex(config_.metrics.stopword_file);
  snapshot["dataset_file"] = dataset_file;
  snapshot["dataset_sha256"] = dataset_hash;
  return snapshot;
}

RunManifest Harness::open_or_create_manifest(const RunPaths& run,
                                             const std::filesystem::path& dataset,
                                             const std::vector<Question>& questions) {
  std::filesystem::create_directories(run.trees());
  std::filesystem::create_directories(run.scores());
  std::filesystem::create_directories(run.metrics());
  std::filesystem::create_directories(run.taxonomy());
  std::filesystem::create_directories(run.cache());

  const std::string dataset_file = dataset.filename().string();
  const std::string dataset_hash = sha256_file_hex(dataset);
  json current = config_snapshot(dataset_file, dataset_hash);

  if (std::filesystem::exists(run.manifest())) {
    RunManifest manifest = RunManifest::load(run.manifest());
    const json& frozen = manifest.config_snapshot;
    if (frozen.value("dataset_sha256", "") != dataset_hash)
      throw AssetDrift("dataset content changed since the run was created");
    if (frozen.at("prompts_sha256") != current.at("prompts_sha256"))
      throw AssetDrift("prompt assets changed since the run was created; "
                       "refusing to mix prompt versions in one run");
    if (frozen.at("stopwords_sha256") != current.at("stopwords_sha256"))
      throw AssetDrift("stopword list changed since the run was created");
    if (frozen.at("ret") != current.at("ret") ||
        frozen.at("gateway") != current.at("gateway"))
      throw AssetDrift("generation config differs from the run's frozen snapshot");

    for (const auto& q : questions) {
      auto it = manifest.status.find(q.id);
      if (it == manifest.status.end()) {
        manifest.status[q.id] = QuestionStatus::pending;
      } else if (it->second == QuestionStatus::failed) {
        it->second = QuestionStatus::pending;  // retry on resume
      } else if (it->second != QuestionStatus::pending &&
                 !std::filesystem::exists(run.tree_file(q.id))) {
        it->second = QuestionStatus::pending;  // tree was deleted; recompute
      }
    }
    return manifest;
  }

  RunManifest manifest;
  manifest.run_id = run.root.filename().string();
  manifest.config_snapshot = std::move(current);
  manifest.dataset_file = dataset_file;
  manifest.dataset_sha256 = dataset_hash;
  manifest.created_at = clock_();
  manifest.updated_at = manifest.created_at;
  for (const auto& q : questions) manifest.status[q.id] = QuestionStatus::pending;
  return manifest;
}

RunSummary Harness::run_generate(const RunPaths& run,
                                 const std::filesystem::path& dataset) {
  RunSummary summary;
  auto questions = load_dataset(dataset);
  if (questions.empty()) {
    summary.warnings.push_back("dataset is empty; nothing to generate");
    return summary;
  }

  RunManifest manifest = open_or_create_manifest(run, dataset, questions);
  auto gateway = make_gateway(run);
  PromptLibrary prompts = PromptLibrary::load(config_.harness.prompt_dir);

  struct Result {
    enum { done, skipped, failed } kind;
    std::string message;
  };
  std::vector<Result> results(questions.size());

  parallel_for(questions.size(), config_.harness.workers, [&](size_t i) {
    const Question& q = questions[i];
    if (std::filesystem::exists(run.tree_file(q.id))) {
      results[i] = {Result::skipped, ""};
      return;
    }
    try {
      // one engine per question keeps each tree's event log isolated
      RetEngine engine(gateway, prompts);
      ExpansionTree tree = engine.build_world(q, config_.ret);
      // the question travels with its tree so later stages need no dataset
      write_json_atomic(run.tree_file(q.id),
                        json{{"question", q}, {"tree", tree}});
      results[i] = {Result::done, ""};
    } catch (const Error& e) {
      results[i] = {Result::failed, e.what()};
    }
  });

  for (size_t i = 0; i < questions.size(); ++i) {
    const auto& qid = questions[i].id;
    switch (results[i].kind) {
      case Result::done:
        manifest.set_status(qid, QuestionStatus::generated);
        ++summary.processed;
        break;
      case Result::skipped:
        if (manifest.status[qid] == QuestionStatus::pending)
          manifest.set_status(qid, QuestionStatus::generated);
        ++summary.skipped;
        break;
      case Result::failed:
        manifest.set_status(qid, QuestionStatus::failed);
        summary.warnings.push_back("generate " + qid + ": " + results[i].message);
        ++summary.failed;
        break;
    }
  }

  manifest.updated_at = clock_();
  manifest.save(run.manifest());
  return summary;
}

namespace {

struct TreeDoc {
  Question question;
  ExpansionTree tree;
};

TreeDoc load_tree(const RunPaths& run, const std::string& qid) {
  auto path = run.tree_file(qid);
  if (!std::filesystem::exists(path))
    throw UnknownQuestionId("no generated tree for question id '" + qid + "'");
  json doc = read_json(path);
  return {doc.at("question").get<Question>(), doc.at("tree").get<ExpansionTree>()};
}

}  // namespace

RunSummary Harness::run_score(const RunPaths& run,
                              const std::filesystem::path& answers_file) {
  RunSummary summary;
  if (!std::filesystem::exists(run.manifest()))
    throw Error("run has no manifest; run generate first: " + run.root.string());
  RunManifest manifest = RunManifest::load(run.manifest());

  auto answers = load_answers(answers_file);
  if (answers.empty()) {
    summary.warnings.push_back("answers file is empty; nothing to score");
    return summary;
  }

  // trees load up front so unknown ids fail before any model call
  std::map<std::string, TreeDoc> trees;
  for (const auto& a : answers)
    if (!trees.count(a.question_id))
      trees.emplace(a.question_id, load_tree(run, a.question_id));

  auto gateway = make_gateway(run);
  PromptLibrary prompts = PromptLibrary::load(config_.harness.prompt_dir);
  Scorer scorer(gateway, prompts);

  struct Row {
    bool ok = false;
    std::string error;
    ScoreReport report;
    size_t flags = 0;
  };
  std::vector<Row> rows(answers.size());

  parallel_for(answers.size(), config_.harness.workers, [&](size_t i) {
    const Answer& a = answers[i];
    try {
      const TreeDoc& doc = trees.at(a.question_id);
      const auto& criteria = doc.tree.criteria;
      if (auto violations = validate_criteria_set(criteria); !violations.empty())
        throw Error("criteria set for '" + a.question_id + "' fails validation: " +
                    violations.front().message);
      rows[i].report = scorer.score_answer(doc.question, a.text, criteria);
      for (const auto& j : rows[i].report.judgments)
        if (j.judge_failed) ++rows[i].flags;
      write_json_atomic(run.score_file(a.question_id, sanitize_for_filename(a.model)),
                        json(rows[i].report));
      rows[i].ok = true;
    } catch (const Error& e) {
      rows[i].error = e.what();
    }
  });

  // summary.csv: one row per answer, answers-file order
  std::ostringstream csv;
  csv << "question_id,model,normalized_clamped,raw,positive_total,flags\n";
  std::map<std::string, std::pair<double, size_t>> by_model;  // sum, count
  std::set<std::string> scored_questions;
  for (size_t i = 0; i < answers.size(); ++i) {
    const Answer& a = answers[i];
    if (!rows[i].ok) {
      summary.warnings.push_back("score " + a.question_id + "/" + a.model + ": " +
                                 rows[i].error);
      ++summary.failed;
      continue;
    }
    const ScoreReport& r = rows[i].report;
    csv << a.question_id << "," << a.model << ","
        << format_fixed(r.normalized_clamped, 6) << "," << r.raw_sum << ","
        << r.positive_total << "," << rows[i].flags << "\n";
    auto& acc = by_model[a.model];
    acc.first += r.normalized_clamped;
    acc.second += 1;
    scored_questions.insert(a.question_id);
    ++summary.processed;
  }
  write_text_atomic(run.scores() / "summary.csv", csv.str());

  // leaderboard.csv: per-model mean of normalized_clamped, as a percentage
  std::ostringstream board;
  board << "model,mean_score_pct,answers\n";
  std::vector<std::pair<std::string, std::pair<double, size_t>>> ranked(by_model.begin(),
                                                                        by_model.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    double ma = a.second.first / a.second.second;
    double mb = b.second.first / b.second.second;
    if (ma != mb) return ma > mb;
    return a.first < b.first;
  });
  for (const auto& [model, acc] : ranked)
    board << model << "," << format_fixed(100.0 * acc.first / acc.second, 1) << ","
          << acc.second << "\n";
  write_text_atomic(run.scores() / "leaderboard.csv", board.str());

  // index of score files for downstream taxonomy
  json index = json::array();
  std::filesystem::path index_path = run.scores() / "index.json";
  std::set<std::pair<std::string, std::string>> seen;
  if (std::filesystem::exists(index_path)) {
    for (const auto& e : read_json(index_path)) {
      auto qid = e.at("question_id").get<std::string>();
      auto model = e.at("model").get<std::string>();
      if (seen.emplace(qid, model).second) index.push_back(e);
    }
  }
  for (size_t i = 0; i < answers.size(); ++i) {
    if (!rows[i].ok) continue;
    if (!seen.emplace(answers[i].question_id, answers[i].model).second) continue;
    index.push_back(
        {{"question_id", answers[i].question_id},
         {"model", answers[i].model},
         {"file", (answers[i].question_id + "." +
                   sanitize_for_filename(answers[i].model) + ".json")}});
  }
  std::sort(index.begin(), index.end(), [](const json& a, const json& b) {
    return std::tie(a.at("question_id").get_ref<const std::string&>(),
                    a.at("model").get_ref<const std::string&>()) <
           std::tie(b.at("question_id").get_ref<const std::string&>(),
                    b.at("model").get_ref<const std::string&>());
  });
  write_json_atomic(index_path, index);

  for (const auto& qid : scored_questions)
    if (manifest.status.count(qid) &&
        manifest.status[qid] == QuestionStatus::generated)
      manifest.set_status(qid, QuestionStatus::scored);
  manifest.updated_at = clock_();
  manifest.save(run.manifest());
  return summary;
}

RunSummary Harness::run_metrics(
    const RunPaths& run, const std::optional<std::filesystem::path>& expert_source) {
  RunSummary summary;
  if (!std::filesystem::exists(run.manifest()))
    throw Error("run has no manifest; run generate first: " + run.root.string());
  RunManifest manifest = RunManifest::load(run.manifest());

  // sidecar expert criteria override the ones stored with the trees
  std::map<std::string, std::vector<Criterion>> sidecar;
  if (expert_source)
    for (auto& q : load_dataset(*expert_source))
      sidecar[q.id] = std::move(q.expert_criteria);

  // every question with a generated tree participates
  std::vector<std::string> qids;
  for (const auto& [qid, status] : manifest.status)
    if (std::filesystem::exists(run.tree_file(qid))) qids.push_back(qid);
  if (qids.empty()) {
    summary.warnings.push_back("no generated trees; nothing to measure");
    return summary;
  }

  std::map<std::string, TreeDoc> trees;
  for (const auto& qid : qids) trees.emplace(qid, load_tree(run, qid));
  for (auto& [qid, doc] : trees) {
    auto it = sidecar.find(qid);
    if (it != sidecar.end()) doc.question.expert_criteria = it->second;
  }

  auto stopwords = load_stopwords(config_.metrics.stopword_file);
  std::vector<std::string> corpus_texts;
  for (const auto& qid : qids)
    for (const auto& c : trees.at(qid).tree.criteria)
      corpus_texts.push_back(c.statement);
  CorpusStats stats = build_corpus_stats(corpus_texts, stopwords);
  write_json_atomic(run.metrics() / "corpus_stats.json", json(stats));

  auto gateway = make_gateway(run);
  PromptLibrary prompts = PromptLibrary::load(config_.harness.prompt_dir);
  JudgeMetrics judge(gateway, prompts);

  struct QMetrics {
    bool ok = false;
    bool skipped = false;
    std::string error;
    MatchReport coverage;
    MatchReport uniqueness;
    std::vector<double> spec;
    std::vector<double> impl;
  };
  std::vector<QMetrics> results(qids.size());

  parallel_for(qids.size(), config_.harness.workers, [&](size_t i) {
    const std::string& qid = qids[i];
    const TreeDoc& doc = trees.at(qid);
    QMetrics& r = results[i];
    if (doc.question.expert_criteria.empty()) {
      r.skipped = true;
      return;
    }
    try {
      const Question& q = doc.question;
      r.coverage = judge.coverage(q, doc.tree.criteria, q.expert_criteria);
      r.uniqueness = judge.uniqueness(q, doc.tree.criteria, q.expert_criteria);
      const std::string prompt_text = q.plain_text();
      for (const auto& c : doc.tree.criteria) {
        r.spec.push_back(specificity(c.statement, stats, stopwords));
        r.impl.push_back(
            implicitness(prompt_text, c.statement, stopwords, config_.metrics.epsilon));
      }
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
  });

  auto mean = [](const std::vector<double>& xs) {
    double sum = 0;
    for (double x : xs) sum += x;
    return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
  };

  std::vector<double> cov_fracs, uni_fracs, spec_by_question, impl_by_question;
  std::vector<double> spec_all, impl_all;
  json skipped_ids = json::array();
  for (size_t i = 0; i < qids.size(); ++i) {
    const std::string& qid = qids[i];
    QMetrics& r = results[i];
    if (r.skipped) {
      summary.warnings.push_back("metrics " + qid + ": missing expert criteria, skipped");
      skipped_ids.push_back(qid);
      ++summary.skipped;
      continue;
    }
    if (!r.ok) {
      summary.warnings.push_back("metrics " + qid + ": " + r.error);
      ++summary.failed;
      continue;
    }
    json per_item = json::array();
    const auto& criteria = trees.at(qid).tree.criteria;
    for (size_t k = 0; k < criteria.size(); ++k) {
      per_item.push_back({{"criterion", criteria[k].statement},
                          {"specificity", r.spec[k]},
                          {"implicitness", r.impl[k]}});
    }
    json doc{{"question_id", qid},
             {"coverage", r.coverage},
             {"uniqueness", r.uniqueness},
             {"mean_specificity", mean(r.spec)},
             {"mean_implicitness", mean(r.impl)},
             {"per_item", std::move(per_item)}};
    write_json_atomic(run.metrics() / (qid + ".json"), doc);

    cov_fracs.push_back(r.coverage.fraction);
    uni_fracs.push_back(r.uniqueness.fraction);
    spec_by_question.push_back(mean(r.spec));
    impl_by_question.push_back(mean(r.impl));
    spec_all.insert(spec_all.end(), r.spec.begin(), r.spec.end());
    impl_all.insert(impl_all.end(), r.impl.begin(), r.impl.end());
    ++summary.processed;
  }

  if (summary.processed == 0)
    summary.warnings.push_back("no question had expert criteria; metrics are empty");

  json aggregate{{"questions", summary.processed},
                 {"skipped", std::move(skipped_ids)},
                 {"mean_coverage", mean(cov_fracs)},
                 {"mean_uniqueness", mean(uni_fracs)},
                 {"mean_specificity_by_criterion", mean(spec_all)},
                 {"mean_specificity_by_question", mean(spec_by_question)},
                 {"mean_implicitness_by_criterion", mean(impl_all)},
                 {"mean_implicitness_by_question", mean(impl_by_question)}};
  write_json_atomic(run.metrics() / "aggregate.json", aggregate);

  manifest.updated_at = clock_();
  manifest.save(run.manifest());
  return summary;
}

RunSummary Harness::run_taxonomy(
    const RunPaths& run, const std::optional<std::filesystem::path>& dimension_map) {
  RunSummary summary;
  if (!std::filesystem::exists(run.manifest()))
    throw Error("run has no manifest; run generate first: " + run.root.string());
  RunManifest manifest = RunManifest::load(run.manifest());

  std::vector<std::string> qids;
  for (const auto& [qid, status] : manifest.status)
    if (std::filesystem::exists(run.tree_file(qid))) qids.push_back(qid);

  std::map<std::string, TreeDoc> trees;
  std::vector<std::pair<std::string, long long>> occurrences;
  for (const auto& qid : qids) {
    trees.emplace(qid, load_tree(run, qid));
    for (const auto& c : trees.at(qid).tree.criteria)
      for (const auto& tag : c.tags) occurrences.emplace_back(tag, 1);
  }

  if (occurrences.empty()) {
    summary.warnings.push_back("no criterion carries tags; taxonomy is empty");
    write_json_atomic(run.taxonomy() / "clusters.json", json::array());
    return summary;
  }

  TagGraph graph = build_tag_graph(occurrences, config_.taxonomy.threshold);
  auto communities = detect_communities(graph);

  std::map<std::string, long long> freqs;
  for (const auto& node : graph.nodes) freqs[node.tag] = node.count;

  struct Cluster {
    std::string representative;
    std::vector<std::string> members;
    long long cumulative = 0;
  };
  std::vector<Cluster> clusters;
  for (const auto& community : communities) {
    Cluster c;
    c.members = community;
    c.representative = representative_label(community, freqs);
    for (const auto& tag : community) c.cumulative += freqs[tag];
    clusters.push_back(std::move(c));
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.cumulative != b.cumulative) return a.cumulative > b.cumulative;
    return a.representative < b.representative;
  });

  json cluster_json = json::array();
  for (const auto& c : clusters)
    cluster_json.push_back({{"representative", c.representative},
                            {"members", c.members},
                            {"cumulative_frequency", c.cumulative}});
  write_json_atomic(run.taxonomy() / "clusters.json", cluster_json);
  summary.processed = clusters.size();

  if (!dimension_map) return summary;

  DimensionMap map = parse_dimension_map(*dimension_map);
  auto index_path = run.scores() / "index.json";
  if (!std::filesystem::exists(index_path))
    throw Error("dimension profiles need a scored run (scores/index.json missing)");

  DimensionAccumulator acc(map);
  std::set<std::string> models;
  for (const auto& entry : read_json(index_path)) {
    auto qid = entry.at("question_id").get<std::string>();
    auto model = entry.at("model").get<std::string>();
    auto file = entry.at("file").get<std::string>();
    if (!trees.count(qid)) continue;
    ScoreReport report = read_json(run.scores() / file).get<ScoreReport>();
    acc.add(model, trees.at(qid).tree.criteria, report.judgments);
    models.insert(model);
  }
  if (models.empty())
    throw Error("dimension profiles need a scored run (no score reports found)");

  auto profiles = acc.profiles();
  std::ostringstream csv;
  csv << "dimension";
  for (const auto& model : models) csv << "," << model;
  csv << "\n";
  for (const auto& profile : profiles) {
    csv << profile.dimension;
    for (const auto& model : models) {
      auto it = profile.by_model.find(model);
      csv << "," << (it == profile.by_model.end() ? "" : format_fixed(it->second, 6));
    }
    csv << "\n";
  }
  write_text_atomic(run.taxonomy() / "radar.csv", csv.str());
  return summary;
}

std::string Harness::report(const RunPaths& run) const {
  if (!std::filesystem::exists(run.manifest()))
    throw Error("run has no manifest: " + run.root.string());
  RunManifest manifest = RunManifest::load(run.manifest());

  std::ostringstream out;
  out << "run " << manifest.run_id << "\n";
  out << "  dataset: " << manifest.dataset_file << " (sha256 "
      << manifest.dataset_sha256.substr(0, 12) << ")\n";
  out << "  created: " << manifest.created_at << "  updated: " << manifest.updated_at
      << "\n";

  std::map<std::string, size_t> counts;
  for (const auto& [qid, status] : manifest.status) ++counts[to_string(status)];
  out << "  questions:";
  for (const auto& [status, count] : counts) out << " " << status << "=" << count;
  out << "\n";

  auto leaderboard = run.scores() / "leaderboard.csv";
  if (std::filesystem::exists(leaderboard)) {
    out << "\nleaderboard (mean normalized score, %):\n";
    std::ifstream in(leaderboard);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      auto first = line.find(',');
      auto second = line.find(',', first + 1);
      out << "  " << line.substr(0, first) << ": "
          << line.substr(first + 1, second - first - 1) << "\n";
    }
  }

  auto aggregate_path = run.metrics() / "aggregate.json";
  if (std::filesystem::exists(aggregate_path)) {
    json agg = read_json(aggregate_path);
    out << "\ncriteria quality (over " << agg.value("questions", 0) << " questions):\n";
    out << "  coverage:     " << format_fixed(agg.value("mean_coverage", 0.0), 4) << "\n";
    out << "  uniqueness:   " << format_fixed(agg.value("mean_uniqueness", 0.0), 4) << "\n";
    out << "  specificity:  " << format_fixed(agg.value("mean_specificity_by_criterion", 0.0), 4)
        << " (by criterion)\n";
    out << "  implicitness: " << format_fixed(agg.value("mean_implicitness_by_criterion", 0.0), 4)
        << " (by criterion)\n";
  }

  auto clusters_path = run.taxonomy() / "clusters.json";
  if (std::filesystem::exists(clusters_path)) {
    json clusters = read_json(clusters_path);
    out << "\ntag clusters: " << clusters.size() << "\n";
    size_t shown = 0;
    for (const auto& c : clusters) {
      if (++shown > 10) break;
      out << "  " << c.at("representative").get<std::string>() << " ("
          << c.at("cumulative_frequency").get<long long>() << ")\n";
    }
  }
  return out.str();
}

}  // namespace rubrictree
