// Internal: structured-output fetching shared by the prompt operators.
#pragma once

#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "rubrictree/errors.hpp"
#include "rubrictree/gateway.hpp"

namespace rubrictree::detail {

struct SchemaIssue {
  std::string message;
  bool length_mismatch = false;
};

using Checker = std::function<std::optional<SchemaIssue>(const nlohmann::json&)>;

/// Completes the prompt and returns the checked array under `key`.
/// Item-schema problems get `item_repairs` repair rounds; a persistent wrong
/// length throws LengthMismatch, any other persistent schema problem throws
/// MalformedOutput. JSON-syntax and top-level-key repairs are handled one
/// layer down by Gateway::complete_json.
inline nlohmann::json fetch_array(Gateway& gateway, const ChatRequest& base,
                                  const std::string& key, const Checker& check,
                                  int item_repairs = 1) {
  ChatRequest request = base;
  std::optional<SchemaIssue> issue;
  for (int attempt = 0; attempt <= item_repairs; ++attempt) {
    nlohmann::json value = gateway.complete_json(request, {key});
    const nlohmann::json& arr = value.at(key);
    if (!arr.is_array())
      issue = SchemaIssue{"'" + key + "' is not an array"};
    else
      issue = check(arr);
    if (!issue) return arr;
    if (attempt < item_repairs) {
      request = base;
      request.messages.push_back(
          {"user", "Your previous reply was invalid: " + issue->message +
                       ". Respond again following the output contract exactly."});
    }
  }
  if (issue->length_mismatch) throw LengthMismatch(issue->message);
  throw MalformedOutput("operator '" + base.purpose_tag + "': " + issue->message);
}

}  // namespace rubrictree::detail
