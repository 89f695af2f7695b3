#include "rubrictree/prompts.hpp"

#include <fstream>
#include <sstream>

#include "rubrictree/errors.hpp"
#include "rubrictree/hashing.hpp"

namespace rubrictree {

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("prompt directory not found: " + dir.string());

  PromptLibrary lib;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    lib.templates_[entry.path().stem().string()] = body.str();
  }
  if (lib.templates_.empty())
    throw ConfigError("no prompt templates in " + dir.string());
  return lib;
}

const std::string& PromptLibrary::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("unknown prompt template: " + name);
  return it->second;
}

// single pass over the template so substituted values are never re-scanned
// for placeholders of their own
std::string PromptLibrary::render_template(
    const std::string& tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  size_t pos = 0;
  while (pos < tmpl.size()) {
    size_t open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    size_t close = tmpl.find('}', open + 1);
    if (close == std::string::npos) {
      out.append(tmpl, open, std::string::npos);
      break;
    }
    auto it = values.find(tmpl.substr(open + 1, close - open - 1));
    if (it != values.end()) {
      out += it->second;
      pos = close + 1;
    } else {
      out.push_back('{');  // not a known placeholder; braces pass through
      pos = open + 1;
    }
  }
  return out;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& values) const {
  return render_template(get(name), values);
}

std::map<std::string, std::string> PromptLibrary::hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, body] : templates_) out[name] = sha256_hex(body);
  return out;
}

}  // namespace rubrictree
