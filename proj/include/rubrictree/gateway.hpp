#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubrictree/core.hpp"

namespace rubrictree {

struct ChatRequest {
  std::string model;
  std::vector<Turn> messages;
  double temperature = 0.4;
  int max_tokens = 16384;
  /// Operator name, for logging and mock defaults. Excluded from the cache key.
  std::string purpose_tag;
};

struct Completion {
  std::string text;
  int attempt_count = 1;  // provider attempts; 1 for cache hits
  bool from_cache = false;
  std::chrono::milliseconds provider_latency{0};
};

/// One chat-completion provider. Implementations throw GatewayError kinds;
/// ProviderUnavailable and TimeoutError are retried by the gateway, the rest
/// are not.
class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Deterministic scripted backend. Resolution order per request prompt:
/// exact match, longest substring key, per-operator default ("@purpose_tag"
/// keys), else MockScriptMiss. Instrumented with call counters so tests can
/// observe provider traffic and concurrency.
class MockBackend : public Backend {
public:
  MockBackend() = default;
  explicit MockBackend(const nlohmann::json& script);
  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path);

  void set_response(const std::string& key, std::string response);
  void set_operator_default(const std::string& purpose_tag, std::string response);

  /// The next n calls throw ProviderUnavailable before any lookup.
  void inject_failures(int n);
  /// Calls after the first n throw ProviderUnavailable (simulates a provider
  /// dying mid-run).
  void fail_after_calls(int n);
  /// Artificial per-call latency, for concurrency-limit tests.
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

  int call_count() const { return calls_.load(); }
  int max_concurrent() const { return max_concurrent_.load(); }
  void reset_counters();

  std::string complete(const ChatRequest& request) override;

private:
  std::map<std::string, std::string> script_;       // substring keys
  std::map<std::string, std::string> by_operator_;  // purpose_tag keys
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_concurrent_{0};
  std::atomic<int> pending_failures_{0};
  std::atomic<int> fail_after_{-1};
  std::chrono::milliseconds latency_{0};
};

/// Live chat-completions HTTP backend. POSTs the role-tagged message list to
/// {base_url}/chat/completions and returns choices[0].message.content.
class HttpBackend : public Backend {
public:
  HttpBackend(std::string base_url, std::string api_key, int timeout_ms = 120000);
  std::string complete(const ChatRequest& request) override;

private:
  std::string base_url_;
  std::string api_key_;
  int timeout_ms_;
};

struct GatewayConfig {
  std::string backend = "mock";  // "http" | "mock"
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4.1";
  double temperature = 0.4;
  int max_tokens = 16384;
  int max_retries = 4;  // => at most 5 attempts
  int max_in_flight = 8;
  int backoff_base_ms = 1000;
  double backoff_factor = 2.0;
  int requests_per_minute = 0;  // 0 = unlimited
  std::string cache_dir;        // empty = in-memory cache only
  std::string mock_script;      // path to a mock script file
  std::string api_key_env = "RUBRICTREE_API_KEY";
  int http_timeout_ms = 120000;
};

/// Uniform access to a completion backend with retries, in-flight limiting,
/// rate limiting, and a content-addressed completion cache (memory, plus one
/// file per entry under cache_dir when configured). Safe to share across
/// threads.
class Gateway {
public:
  Gateway(GatewayConfig config, std::shared_ptr<Backend> backend);

  /// Builds the backend named by config.backend. For "http" the API key is
  /// read from the environment variable config.api_key_env.
  static std::shared_ptr<Gateway> from_config(const GatewayConfig& config);

  /// Deterministic function of (model, messages, temperature, max_tokens).
  static std::string cache_key(const ChatRequest& request);

  Completion complete(const ChatRequest& request);

  /// Extracts the first well-formed JSON object from the completion and
  /// verifies the expected top-level keys, re-prompting with a repair
  /// instruction up to max_repairs times. Throws MalformedOutput or
  /// MissingKeys once repairs are exhausted.
  nlohmann::json complete_json(const ChatRequest& request,
                               const std::vector<std::string>& expected_keys,
                               int max_repairs = 2);

  /// Request pre-filled with the configured model/temperature/max_tokens and
  /// a single user message.
  ChatRequest make_request(std::string prompt, std::string purpose_tag) const;

  const GatewayConfig& config() const { return config_; }
  Backend& backend() { return *backend_; }

private:
  std::optional<std::string> cache_lookup(const std::string& key);
  void cache_store(const std::string& key, const std::string& text);

  GatewayConfig config_;
  std::shared_ptr<Backend> backend_;

  std::mutex cache_mutex_;
  std::map<std::string, std::string> memory_cache_;

  // in-flight limiter
  std::mutex flight_mutex_;
  std::condition_variable flight_cv_;
  int in_flight_ = 0;

  // token bucket, active when requests_per_minute > 0
  std::mutex bucket_mutex_;
  double tokens_ = 0;
  std::chrono::steady_clock::time_point last_refill_;
};

/// First well-formed JSON object embedded in text: tries the whole text,
/// then fenced code blocks, then balanced-brace scanning. Returns nullopt
/// when nothing parses.
std::optional<nlohmann::json> extract_first_json_object(const std::string& text);

}  // namespace rubrictree
