// CPPHTTPLIB_OPENSSL_SUPPORT comes from the build so every translation unit
// sees the same httplib configuration
#include <httplib.h>

#include <nlohmann/json.hpp>

#include "rubrictree/errors.hpp"
#include "rubrictree/gateway.hpp"

namespace rubrictree {

using nlohmann::json;

namespace {

// splits "https://host[:port]/prefix" into origin + path prefix
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  size_t path_start = base_url.find('/', scheme_end == std::string::npos
                                             ? 0
                                             : scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  return {base_url.substr(0, path_start), base_url.substr(path_start)};
}

}  // namespace

std::string HttpBackend::complete(const ChatRequest& request) {
  auto [origin, prefix] = split_base_url(base_url_);

  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::milliseconds(timeout_ms_));
  client.set_read_timeout(std::chrono::milliseconds(timeout_ms_));
  client.set_write_timeout(std::chrono::milliseconds(timeout_ms_));

  json messages = json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", m.role}, {"content", m.text}});
  json body = {{"model", request.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};

  httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
  auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                         "application/json");

  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write)
      throw TimeoutError("http: " + httplib::to_string(err));
    throw ProviderUnavailable("http: " + httplib::to_string(err));
  }
  if (res->status == 401 || res->status == 403)
    throw AuthFailure("http " + std::to_string(res->status) + ": " + res->body);
  if (res->status == 429 || res->status >= 500)
    throw ProviderUnavailable("http " + std::to_string(res->status) + ": " +
                              res->body);
  if (res->status != 200)
    throw GatewayError("http " + std::to_string(res->status) + ": " + res->body);

  try {
    json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw MalformedOutput(std::string("unexpected completion payload: ") + e.what());
  }
}

}  // namespace rubrictree
