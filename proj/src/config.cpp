#include "rubrictree/config.hpp"

#include <fstream>
#include <sstream>

#include "rubrictree/errors.hpp"
#include "rubrictree/text.hpp"

namespace rubrictree {

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
  auto v = to_lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

int parse_int(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

}  // namespace

AppConfig parse_config_text(const std::string& text) {
  AppConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    auto stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      section = to_lower(trim(stripped.substr(1, stripped.size() - 2)));
      continue;
    }
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = to_lower(trim(stripped.substr(0, eq)));
    std::string value = trim(stripped.substr(eq + 1));
    std::string full = section.empty() ? key : section + "." + key;

    if (full == "gateway.backend") config.gateway.backend = value;
    else if (full == "gateway.base_url") config.gateway.base_url = value;
    else if (full == "gateway.model") config.gateway.model = value;
    else if (full == "gateway.temperature") config.gateway.temperature = parse_double(value, full);
    else if (full == "gateway.max_tokens") config.gateway.max_tokens = parse_int(value, full);
    else if (full == "gateway.max_retries") config.gateway.max_retries = parse_int(value, full);
    else if (full == "gateway.max_in_flight") config.gateway.max_in_flight = parse_int(value, full);
    else if (full == "gateway.backoff_base_ms") config.gateway.backoff_base_ms = parse_int(value, full);
    else if (full == "gateway.requests_per_minute") config.gateway.requests_per_minute = parse_int(value, full);
    else if (full == "gateway.cache_dir") config.gateway.cache_dir = value;
    else if (full == "gateway.mock_script") config.gateway.mock_script = value;
    else if (full == "gateway.api_key_env") config.gateway.api_key_env = value;
    else if (full == "gateway.http_timeout_ms") config.gateway.http_timeout_ms = parse_int(value, full);
    else if (full == "ret.w1") config.ret.w1 = parse_int(value, full);
    else if (full == "ret.w2") config.ret.w2 = parse_int(value, full);
    else if (full == "ret.w3") config.ret.w3 = parse_int(value, full);
    else if (full == "ret.enable_review") config.ret.enable_review = parse_bool(value, full);
    else if (full == "ret.enable_polarity_and_scoring")
      config.ret.enable_polarity_and_scoring = parse_bool(value, full);
    else if (full == "metrics.epsilon") config.metrics.epsilon = parse_double(value, full);
    else if (full == "metrics.stopword_file") config.metrics.stopword_file = value;
    else if (full == "taxonomy.threshold") config.taxonomy.threshold = parse_double(value, full);
    else if (full == "taxonomy.dimension_map") config.taxonomy.dimension_map = value;
    else if (full == "harness.workers") config.harness.workers = parse_int(value, full);
    else if (full == "harness.prompt_dir") config.harness.prompt_dir = value;
    else
      throw ConfigError("unknown config key '" + full + "'");
  }

  if (config.ret.w1 < 0 || config.ret.w2 < 0 || config.ret.w3 < 0)
    throw ConfigError("expansion widths must be >= 0");
  if (config.harness.workers < 1) throw ConfigError("harness.workers must be >= 1");
  return config;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream body;
  body << in.rdbuf();
  return parse_config_text(body.str());
}

}  // namespace rubrictree
