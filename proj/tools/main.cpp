#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rubrictree/config.hpp"
#include "rubrictree/errors.hpp"
#include "rubrictree/harness.hpp"

namespace {

using rubrictree::AppConfig;
using rubrictree::Harness;
using rubrictree::RunPaths;
using rubrictree::RunSummary;

int finish(const RunSummary& summary, const std::string& verb) {
  for (const auto& warning : summary.warnings)
    std::cerr << "warning: " << warning << "\n";
  std::cout << verb << ": " << summary.processed << " processed, " << summary.skipped
            << " skipped, " << summary.failed << " failed\n";
  return summary.failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"question-specific rubric generation, judging, and reporting"};
  app.require_subcommand(1);

  std::string config_path = "rubrictree.ini";
  std::string run_dir;
  std::string backend_override;
  app.add_option("--config", config_path, "config file (INI)")
      ->capture_default_str();
  app.add_option("--run", run_dir, "run directory")->required();
  app.add_option("--backend", backend_override,
                 "override gateway backend (mock|http)");

  std::string dataset;
  auto* generate = app.add_subcommand("generate", "build criteria trees per question");
  generate->fallthrough();
  generate->add_option("--dataset", dataset, "line-JSON question dataset")->required();

  std::string answers;
  auto* score = app.add_subcommand("score", "judge answers against generated criteria");
  score->fallthrough();
  score->add_option("--answers", answers, "line-JSON answers file")->required();

  std::string expert_source;
  auto* metrics = app.add_subcommand("metrics", "criteria-quality metrics");
  metrics->fallthrough();
  metrics->add_option("--expert", expert_source,
                      "sidecar dataset supplying expert criteria (optional)");

  std::string dimension_map;
  auto* taxonomy = app.add_subcommand("taxonomy", "tag clustering and dimension profiles");
  taxonomy->fallthrough();
  taxonomy->add_option("--dimension-map", dimension_map,
                       "dimension map file (name: tag, tag, ...)");

  auto* report = app.add_subcommand("report", "print a consolidated run summary");
  report->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    AppConfig config = std::filesystem::exists(config_path)
                           ? rubrictree::load_config(config_path)
                           : AppConfig{};
    if (!backend_override.empty()) config.gateway.backend = backend_override;

    Harness harness(std::move(config));
    RunPaths run{run_dir};

    if (generate->parsed()) return finish(harness.run_generate(run, dataset), "generate");
    if (score->parsed()) return finish(harness.run_score(run, answers), "score");
    if (metrics->parsed()) {
      std::optional<std::filesystem::path> sidecar;
      if (!expert_source.empty()) sidecar = expert_source;
      return finish(harness.run_metrics(run, sidecar), "metrics");
    }
    if (taxonomy->parsed()) {
      std::optional<std::filesystem::path> map;
      if (!dimension_map.empty())
        map = dimension_map;
      else if (!harness.config().taxonomy.dimension_map.empty())
        map = harness.config().taxonomy.dimension_map;
      return finish(harness.run_taxonomy(run, map), "taxonomy");
    }
    if (report->parsed()) {
      std::cout << harness.report(run);
      return 0;
    }
  } catch (const rubrictree::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
