#include "rubrictree/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include "rubrictree/errors.hpp"
#include "rubrictree/hashing.hpp"

namespace rubrictree {

using nlohmann::json;

// --- MockBackend -------------------------------------------------------------

MockBackend::MockBackend(const json& script) {
  for (const auto& [key, value] : script.items()) {
    if (!value.is_string()) continue;
    if (!key.empty() && key[0] == '@')
      by_operator_[key.substr(1)] = value.get<std::string>();
    else
      script_[key] = value.get<std::string>();
  }
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script: " + path.string());
  json script;
  in >> script;
  return std::make_shared<MockBackend>(script);
}

void MockBackend::set_response(const std::string& key, std::string response) {
  script_[key] = std::move(response);
}

void MockBackend::set_operator_default(const std::string& purpose_tag,
                                       std::string response) {
  by_operator_[purpose_tag] = std::move(response);
}

void MockBackend::inject_failures(int n) { pending_failures_ = n; }

void MockBackend::fail_after_calls(int n) { fail_after_ = n; }

void MockBackend::reset_counters() {
  calls_ = 0;
  max_concurrent_ = 0;
}

std::string MockBackend::complete(const ChatRequest& request) {
  int now_in_flight = ++in_flight_;
  int seen = max_concurrent_.load();
  while (now_in_flight > seen &&
         !max_concurrent_.compare_exchange_weak(seen, now_in_flight)) {
  }
  int call_index = ++calls_;
  struct Release {
    std::atomic<int>& counter;
    ~Release() { --counter; }
  } release{in_flight_};

  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  int fail_after = fail_after_.load();
  if (fail_after >= 0 && call_index > fail_after)
    throw ProviderUnavailable("mock: provider down (fail_after_calls)");

  int remaining = pending_failures_.load();
  while (remaining > 0 &&
         !pending_failures_.compare_exchange_weak(remaining, remaining - 1)) {
  }
  if (remaining > 0) throw ProviderUnavailable("mock: injected transient failure");

  std::string prompt;
  for (const auto& m : request.messages) {
    if (!prompt.empty()) prompt += "\n";
    prompt += m.text;
  }

  auto exact = script_.find(prompt);
  if (exact != script_.end()) return exact->second;

  // longest substring key; map order breaks length ties lexicographically
  const std::string* best = nullptr;
  size_t best_len = 0;
  for (const auto& [key, response] : script_) {
    if (key.size() >= best_len && !key.empty() &&
        prompt.find(key) != std::string::npos) {
      if (key.size() > best_len) {
        best = &response;
        best_len = key.size();
      }
    }
  }
  if (best) return *best;

  auto op = by_operator_.find(request.purpose_tag);
  if (op != by_operator_.end()) return op->second;

  throw MockScriptMiss("mock: no script entry matches prompt for operator '" +
                       request.purpose_tag + "'");
}

// --- HttpBackend -------------------------------------------------------------

HttpBackend::HttpBackend(std::string base_url, std::string api_key, int timeout_ms)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)),
      timeout_ms_(timeout_ms) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

// defined in http_backend.cpp to keep httplib out of this translation unit

// --- cache key ----------------------------------------------------------------

std::string Gateway::cache_key(const ChatRequest& request) {
  json fingerprint = json::array();
  fingerprint.push_back(request.model);
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({m.role, m.text});
  fingerprint.push_back(std::move(msgs));
  fingerprint.push_back(request.temperature);
  fingerprint.push_back(request.max_tokens);
  return sha256_hex(fingerprint.dump());
}

// --- Gateway -------------------------------------------------------------------

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)),
      last_refill_(std::chrono::steady_clock::now()) {
  tokens_ = config_.requests_per_minute;
  if (!config_.cache_dir.empty())
    std::filesystem::create_directories(config_.cache_dir);
}

std::shared_ptr<Gateway> Gateway::from_config(const GatewayConfig& config) {
  std::shared_ptr<Backend> backend;
  if (config.backend == "mock") {
    if (!config.mock_script.empty())
      backend = MockBackend::from_file(config.mock_script);
    else
      backend = std::make_shared<MockBackend>();
  } else if (config.backend == "http") {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key)
      throw AuthFailure("API key environment variable " + config.api_key_env +
                        " is not set");
    backend = std::make_shared<HttpBackend>(config.base_url, key,
                                            config.http_timeout_ms);
  } else {
    throw ConfigError("unknown backend '" + config.backend + "'");
  }
  return std::make_shared<Gateway>(config, std::move(backend));
}

ChatRequest Gateway::make_request(std::string prompt, std::string purpose_tag) const {
  ChatRequest req;
  req.model = config_.model;
  req.messages.push_back({"user", std::move(prompt)});
  req.temperature = config_.temperature;
  req.max_tokens = config_.max_tokens;
  req.purpose_tag = std::move(purpose_tag);
  return req;
}

std::optional<std::string> Gateway::cache_lookup(const std::string& key) {
  {
    std::lock_guard lock(cache_mutex_);
    auto it = memory_cache_.find(key);
    if (it != memory_cache_.end()) return it->second;
  }
  if (config_.cache_dir.empty()) return std::nullopt;
  auto path = std::filesystem::path(config_.cache_dir) / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    json entry;
    in >> entry;
    auto text = entry.at("text").get<std::string>();
    std::lock_guard lock(cache_mutex_);
    memory_cache_[key] = text;
    return text;
  } catch (const json::exception&) {
    return std::nullopt;  // corrupt entry: recompute and overwrite
  }
}

void Gateway::cache_store(const std::string& key, const std::string& text) {
  {
    std::lock_guard lock(cache_mutex_);
    memory_cache_[key] = text;
  }
  if (config_.cache_dir.empty()) return;
  auto dir = std::filesystem::path(config_.cache_dir);
  auto final_path = dir / (key + ".json");
  if (std::filesystem::exists(final_path)) return;
  auto tmp_path = dir / (key + ".tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary);
    out << json{{"text", text}}.dump(2) << "\n";
  }
  std::error_code ec;
  std::filesystem::rename(tmp_path, final_path, ec);  // atomic single writer
}

Completion Gateway::complete(const ChatRequest& request) {
  const std::string key = cache_key(request);
  if (auto hit = cache_lookup(key)) {
    Completion c;
    c.text = *hit;
    c.from_cache = true;
    return c;
  }

  if (config_.requests_per_minute > 0) {
    std::unique_lock lock(bucket_mutex_);
    for (;;) {
      auto now = std::chrono::steady_clock::now();
      double elapsed = std::chrono::duration<double>(now - last_refill_).count();
      tokens_ = std::min<double>(config_.requests_per_minute,
                                 tokens_ + elapsed * config_.requests_per_minute / 60.0);
      last_refill_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        break;
      }
      lock.unlock();
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      lock.lock();
    }
  }

  {
    std::unique_lock lock(flight_mutex_);
    flight_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    Gateway& g;
    ~Release() {
      std::lock_guard lock(g.flight_mutex_);
      --g.in_flight_;
      g.flight_cv_.notify_one();
    }
  } release{*this};

  static thread_local std::mt19937_64 rng{std::random_device{}()};
  const int max_attempts = config_.max_retries + 1;
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    auto started = std::chrono::steady_clock::now();
    try {
      std::string text = backend_->complete(request);
      cache_store(key, text);
      Completion c;
      c.text = std::move(text);
      c.attempt_count = attempt;
      c.provider_latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      return c;
    } catch (const ProviderUnavailable& e) {
      last_error = e.what();
    } catch (const TimeoutError& e) {
      last_error = e.what();
    }
    if (attempt < max_attempts) {
      double ceiling = config_.backoff_base_ms *
                       std::pow(config_.backoff_factor, attempt - 1);
      std::uniform_real_distribution<double> jitter(0.0, ceiling);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long>(jitter(rng))));
    }
  }
  throw ProviderUnavailable("retries exhausted after " +
                            std::to_string(max_attempts) +
                            " attempts: " + last_error);
}

// --- JSON extraction -----------------------------------------------------------

namespace {

std::optional<json> try_parse_object(const std::string& text) {
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

// string-aware balanced scan starting at text[start] == '{'
std::optional<std::string> balanced_object_at(const std::string& text, size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escape = false;
  for (size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (escape) {
      escape = false;
      continue;
    }
    if (c == '\\') {
      escape = in_string;
      continue;
    }
    if (c == '"') {
      in_string = !in_string;
      continue;
    }
    if (in_string) continue;
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) return text.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<json> extract_first_json_object(const std::string& text) {
  if (auto whole = try_parse_object(text)) return whole;

  static const std::regex fence(R"(```(?:json)?\s*([\s\S]*?)```)",
                                std::regex::icase);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), fence);
       it != std::sregex_iterator(); ++it) {
    if (auto fenced = try_parse_object((*it)[1].str())) return fenced;
  }

  for (size_t pos = text.find('{'); pos != std::string::npos;
       pos = text.find('{', pos + 1)) {
    if (auto candidate = balanced_object_at(text, pos)) {
      if (auto parsed = try_parse_object(*candidate)) return parsed;
    }
  }
  return std::nullopt;
}

json Gateway::complete_json(const ChatRequest& request,
                            const std::vector<std::string>& expected_keys,
                            int max_repairs) {
  std::string last_error;
  bool keys_were_missing = false;

  ChatRequest attempt_request = request;
  for (int attempt = 0; attempt <= max_repairs; ++attempt) {
    Completion completion = complete(attempt_request);
    if (auto value = extract_first_json_object(completion.text)) {
      std::vector<std::string> missing;
      for (const auto& k : expected_keys)
        if (!value->contains(k)) missing.push_back(k);
      if (missing.empty()) return *value;
      std::string joined;
      for (const auto& k : missing) joined += (joined.empty() ? "" : ", ") + k;
      last_error = "missing required keys: " + joined;
      keys_were_missing = true;
    } else {
      last_error = "no well-formed JSON object found in reply";
      keys_were_missing = false;
    }

    if (attempt < max_repairs) {
      // repair message carries the error and key list, never the failed output
      std::string keys;
      for (const auto& k : expected_keys) keys += (keys.empty() ? "" : ", ") + k;
      attempt_request = request;
      attempt_request.messages.push_back(
          {"user", "Your reply could not be used (" + last_error +
                       "). Repair attempt " + std::to_string(attempt + 1) +
                       ": respond again with ONLY one JSON object with top-level "
                       "keys: " + keys + ". No prose, no code fences."});
    }
  }

  std::string context = " [" + request.purpose_tag + "] after " +
                        std::to_string(max_repairs + 1) + " attempts: " + last_error;
  if (keys_were_missing) throw MissingKeys("structured output" + context);
  throw MalformedOutput("structured output" + context);
}

}  // namespace rubrictree
