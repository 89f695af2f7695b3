#pragma once

#include <filesystem>
#include <string>

#include "rubrictree/gateway.hpp"
#include "rubrictree/ret.hpp"

namespace rubrictree {

struct MetricsConfig {
  double epsilon = 1e-9;
  std::string stopword_file = "assets/stopwords.txt";
};

struct TaxonomyConfig {
  double threshold = 0.85;
  std::string dimension_map;  // optional
};

struct HarnessConfig {
  int workers = 8;
  std::string prompt_dir = "assets/prompts";
};

struct AppConfig {
  GatewayConfig gateway;
  RetConfig ret;
  MetricsConfig metrics;
  TaxonomyConfig taxonomy;
  HarnessConfig harness;
};

/// INI-style config: [section] headers, key = value lines, '#'/';' comments.
/// Unknown keys are rejected so typos surface immediately.
AppConfig load_config(const std::filesystem::path& path);
AppConfig parse_config_text(const std::string& text);

}  // namespace rubrictree
