#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace rubrictree {

/// Prompt templates loaded from a directory of .txt files, addressed by
/// basename. Placeholders are written as {name} and substituted verbatim;
/// braces that do not spell a provided placeholder pass through untouched.
class PromptLibrary {
public:
  static PromptLibrary load(const std::filesystem::path& dir);

  const std::string& get(const std::string& name) const;
  bool has(const std::string& name) const { return templates_.count(name) > 0; }

  static std::string render_template(const std::string& tmpl,
                                     const std::map<std::string, std::string>& values);
  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& values) const;

  /// sha256 per template, for manifest drift detection.
  std::map<std::string, std::string> hashes() const;

private:
  std::map<std::string, std::string> templates_;
};

}  // namespace rubrictree
