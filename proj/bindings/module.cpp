#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include <nlohmann/json.hpp>

#include "rubrictree/core.hpp"
#include "rubrictree/gateway.hpp"
#include "rubrictree/metrics.hpp"
#include "rubrictree/prompts.hpp"
#include "rubrictree/ret.hpp"
#include "rubrictree/scorer.hpp"
#include "rubrictree/taxonomy.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

rubrictree::StopwordSet to_set(const std::vector<std::string>& words) {
  return {words.begin(), words.end()};
}

// clusters as (representative, members, cumulative_frequency) tuples
std::vector<std::tuple<std::string, std::vector<std::string>, long long>> cluster_tags(
    const std::vector<std::pair<std::string, long long>>& occurrences,
    double threshold) {
  auto graph = rubrictree::build_tag_graph(occurrences, threshold);
  auto communities = rubrictree::detect_communities(graph);
  std::map<std::string, long long> freqs;
  for (const auto& node : graph.nodes) freqs[node.tag] = node.count;

  std::vector<std::tuple<std::string, std::vector<std::string>, long long>> out;
  for (const auto& community : communities) {
    long long total = 0;
    for (const auto& tag : community) total += freqs[tag];
    out.emplace_back(rubrictree::representative_label(community, freqs), community,
                     total);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) > std::get<2>(b);
    return std::get<0>(a) < std::get<0>(b);
  });
  return out;
}

std::shared_ptr<rubrictree::Gateway> mock_gateway(const std::string& mock_script_json) {
  auto backend =
      std::make_shared<rubrictree::MockBackend>(json::parse(mock_script_json));
  rubrictree::GatewayConfig config;
  config.backend = "mock";
  config.backoff_base_ms = 1;
  return std::make_shared<rubrictree::Gateway>(config, backend);
}

std::string build_world_json(const std::string& question_json,
                             const std::string& mock_script_json,
                             const std::string& prompt_dir, int w1, int w2, int w3,
                             bool enable_review, bool enable_polarity_and_scoring) {
  auto question = json::parse(question_json).get<rubrictree::Question>();
  rubrictree::RetEngine engine(mock_gateway(mock_script_json),
                               rubrictree::PromptLibrary::load(prompt_dir));
  rubrictree::RetConfig config{w1, w2, w3, enable_review, enable_polarity_and_scoring};
  return json(engine.build_world(question, config)).dump(2);
}

std::string score_answer_json(const std::string& question_json,
                              const std::string& answer,
                              const std::string& criteria_json,
                              const std::string& mock_script_json,
                              const std::string& prompt_dir) {
  auto question = json::parse(question_json).get<rubrictree::Question>();
  auto criteria =
      json::parse(criteria_json).get<std::vector<rubrictree::Criterion>>();
  rubrictree::Scorer scorer(mock_gateway(mock_script_json),
                            rubrictree::PromptLibrary::load(prompt_dir));
  return json(scorer.score_answer(question, answer, criteria)).dump(2);
}

double specificity_over_corpus(const std::string& criterion,
                               const std::vector<std::string>& corpus_texts,
                               const std::vector<std::string>& stopwords) {
  auto set = to_set(stopwords);
  auto stats = rubrictree::build_corpus_stats(corpus_texts, set);
  return rubrictree::specificity(criterion, stats, set);
}

}  // namespace

PYBIND11_MODULE(_rubrictree, m) {
  m.doc() = "question-specific rubric generation and scoring core";

  m.def("normalize_score", [](long long raw, long long positive_total) {
    auto n = rubrictree::normalize(raw, positive_total);
    return std::make_pair(n.value, n.clamped);
  },
        py::arg("raw_sum"), py::arg("positive_total"),
        "raw/positive with clamping into [0,1]; returns (normalized, clamped)");

  m.def("tokenize",
        [](const std::string& text, const std::vector<std::string>& stopwords) {
          return rubrictree::tokenize(text, to_set(stopwords));
        },
        py::arg("text"), py::arg("stopwords") = std::vector<std::string>{});

  m.def("specificity", &specificity_over_corpus, py::arg("criterion"),
        py::arg("corpus_texts"), py::arg("stopwords") = std::vector<std::string>{});

  m.def("implicitness",
        [](const std::string& prompt, const std::string& criterion,
           const std::vector<std::string>& stopwords, double epsilon) {
          return rubrictree::implicitness(prompt, criterion, to_set(stopwords), epsilon);
        },
        py::arg("prompt"), py::arg("criterion"),
        py::arg("stopwords") = std::vector<std::string>{}, py::arg("epsilon") = 1e-9);

  m.def("normalize_human_scores", &rubrictree::normalize_human_scores,
        py::arg("ratings"));

  m.def("levenshtein_similarity",
        [](const std::string& a, const std::string& b) {
          return rubrictree::levenshtein_similarity(a, b);
        },
        py::arg("a"), py::arg("b"));

  m.def("stem", [](const std::string& w) { return rubrictree::stem(w); },
        py::arg("word"));

  m.def("normalize_tag", &rubrictree::normalize_tag, py::arg("tag"));

  m.def("cluster_tags", &cluster_tags, py::arg("occurrences"),
        py::arg("threshold") = 0.85,
        "greedy-modularity tag clusters as (representative, members, frequency)");

  m.def("build_world_json", &build_world_json, py::arg("question_json"),
        py::arg("mock_script_json"), py::arg("prompt_dir"), py::arg("w1") = 3,
        py::arg("w2") = 4, py::arg("w3") = 3, py::arg("enable_review") = true,
        py::arg("enable_polarity_and_scoring") = true,
        "run the full expansion pipeline against a scripted mock backend");

  m.def("score_answer_json", &score_answer_json, py::arg("question_json"),
        py::arg("answer"), py::arg("criteria_json"), py::arg("mock_script_json"),
        py::arg("prompt_dir"),
        "judge an answer against criteria with a scripted mock judge");
}
