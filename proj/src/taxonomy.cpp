#include "rubrictree/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rubrictree/errors.hpp"
#include "rubrictree/text.hpp"

namespace rubrictree {

std::string normalize_tag(const std::string& tag) {
  std::string collapsed = dedup_key(tag);
  size_t b = 0;
  size_t e = collapsed.size();
  auto is_word = [](unsigned char c) { return is_word_char(c); };
  while (b < e && !is_word(collapsed[b])) ++b;
  while (e > b && !is_word(collapsed[e - 1])) --e;
  std::string out = collapsed.substr(b, e - b);
  if (out.empty()) throw EmptyTag("tag '" + tag + "' normalizes to nothing");
  return out;
}

double levenshtein_similarity(std::string_view a, std::string_view b) {
  if (a == b) return 1.0;
  const size_t m = a.size();
  const size_t n = b.size();
  if (m == 0 || n == 0) return 0.0;

  std::vector<size_t> costs(n + 1);
  std::iota(costs.begin(), costs.end(), size_t{0});
  for (size_t i = 0; i < m; ++i) {
    size_t corner = costs[0];
    costs[0] = i + 1;
    for (size_t j = 0; j < n; ++j) {
      size_t upper = costs[j + 1];
      if (a[i] == b[j])
        costs[j + 1] = corner;
      else
        costs[j + 1] = 1 + std::min({costs[j], upper, corner});
      corner = upper;
    }
  }
  return 1.0 - static_cast<double>(costs[n]) / static_cast<double>(std::max(m, n));
}

namespace {

std::set<std::string> word_stems(const std::string& tag) {
  std::set<std::string> stems;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      stems.insert(stem(word));
      word.clear();
    }
  };
  for (unsigned char c : tag) {
    if (std::isspace(c))
      flush();
    else
      word.push_back(static_cast<char>(c));
  }
  flush();
  return stems;
}

bool stems_overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& s : a)
    if (b.count(s)) return true;
  return false;
}

}  // namespace

TagGraph build_tag_graph(const std::vector<std::pair<std::string, long long>>& occurrences,
                         double threshold) {
  std::map<std::string, long long> counts;
  for (const auto& [tag, count] : occurrences) {
    try {
      counts[normalize_tag(tag)] += count;
    } catch (const EmptyTag&) {
      // nothing left after normalization; drop the occurrence
    }
  }

  TagGraph graph;
  graph.nodes.reserve(counts.size());
  for (const auto& [tag, count] : counts) graph.nodes.push_back({tag, count});

  std::vector<std::set<std::string>> stems;
  stems.reserve(graph.nodes.size());
  for (const auto& node : graph.nodes) stems.push_back(word_stems(node.tag));

  for (size_t i = 0; i < graph.nodes.size(); ++i) {
    for (size_t j = i + 1; j < graph.nodes.size(); ++j) {
      if (stems_overlap(stems[i], stems[j])) {
        graph.edges.push_back({i, j, "stem-overlap"});
      } else if (levenshtein_similarity(graph.nodes[i].tag, graph.nodes[j].tag) >
                 threshold) {
        graph.edges.push_back({i, j, "levenshtein"});
      }
    }
  }
  return graph;
}

double modularity(const TagGraph& graph,
                  const std::vector<std::vector<std::string>>& partition) {
  const double m = static_cast<double>(graph.edges.size());
  if (m == 0) return 0.0;

  std::map<std::string, size_t> community_of;
  for (size_t c = 0; c < partition.size(); ++c)
    for (const auto& tag : partition[c]) community_of[tag] = c;

  std::vector<double> intra(partition.size(), 0.0);
  std::vector<double> degree(partition.size(), 0.0);
  for (const auto& edge : graph.edges) {
    size_t cu = community_of.at(graph.nodes[edge.u].tag);
    size_t cv = community_of.at(graph.nodes[edge.v].tag);
    degree[cu] += 1.0;
    degree[cv] += 1.0;
    if (cu == cv) intra[cu] += 1.0;
  }

  double q = 0.0;
  for (size_t c = 0; c < partition.size(); ++c) {
    double frac = degree[c] / (2.0 * m);
    q += intra[c] / m - frac * frac;
  }
  return q;
}

std::vector<std::vector<std::string>> detect_communities(const TagGraph& graph) {
  const size_t n = graph.nodes.size();
  std::vector<std::vector<std::string>> communities;
  const double m = static_cast<double>(graph.edges.size());

  // community id -> members / degree sum; pair edge counts between live ids
  std::vector<std::set<std::string>> members(n);
  std::vector<double> degree(n, 0.0);
  std::map<std::pair<size_t, size_t>, double> between;
  std::vector<bool> alive(n, true);

  for (size_t i = 0; i < n; ++i) members[i].insert(graph.nodes[i].tag);
  for (const auto& edge : graph.edges) {
    degree[edge.u] += 1.0;
    degree[edge.v] += 1.0;
    between[{std::min(edge.u, edge.v), std::max(edge.u, edge.v)}] += 1.0;
  }

  auto label = [&](size_t c) -> const std::string& { return *members[c].begin(); };

  if (m > 0) {
    for (;;) {
      double best_gain = 0.0;
      std::optional<std::pair<size_t, size_t>> best_pair;
      std::pair<std::string, std::string> best_labels;
      for (const auto& [pair, e_ab] : between) {
        auto [a, b] = pair;
        if (!alive[a] || !alive[b] || e_ab <= 0.0) continue;
        double gain = e_ab / m - degree[a] * degree[b] / (2.0 * m * m);
        if (gain <= 0.0) continue;
        std::pair labels{std::min(label(a), label(b)), std::max(label(a), label(b))};
        if (!best_pair || gain > best_gain ||
            (gain == best_gain && labels < best_labels)) {
          best_gain = gain;
          best_pair = pair;
          best_labels = labels;
        }
      }
      if (!best_pair) break;

      auto [a, b] = *best_pair;
      // merge b into a
      members[a].insert(members[b].begin(), members[b].end());
      members[b].clear();
      degree[a] += degree[b];
      alive[b] = false;
      std::map<std::pair<size_t, size_t>, double> updated;
      for (const auto& [pair, count] : between) {
        auto [u, v] = pair;
        if (!alive[u] && u != b) continue;
        if (!alive[v] && v != b) continue;
        size_t nu = (u == b) ? a : u;
        size_t nv = (v == b) ? a : v;
        if (nu == nv) continue;  // internalized edges drop out of the pair map
        updated[{std::min(nu, nv), std::max(nu, nv)}] += count;
      }
      between = std::move(updated);
    }
  }

  for (size_t c = 0; c < n; ++c) {
    if (!alive[c] || members[c].empty()) continue;
    communities.emplace_back(members[c].begin(), members[c].end());
  }
  std::sort(communities.begin(), communities.end());
  return communities;
}

std::string representative_label(const std::vector<std::string>& cluster,
                                 const std::map<std::string, long long>& freqs) {
  if (cluster.empty()) throw EmptyTag("empty cluster");
  const std::string* best = nullptr;
  long long best_count = -1;
  for (const auto& tag : cluster) {
    auto it = freqs.find(tag);
    long long count = it == freqs.end() ? 0 : it->second;
    if (count > best_count || (count == best_count && (!best || tag < *best))) {
      best = &tag;
      best_count = count;
    }
  }
  return *best;
}

DimensionMap parse_dimension_map_text(const std::string& text) {
  DimensionMap map;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    auto colon = stripped.find(':');
    if (colon == std::string::npos)
      throw ConfigError("dimension map line missing ':': " + stripped);
    std::string name = trim(stripped.substr(0, colon));
    std::vector<std::string> tags;
    std::string tag;
    std::istringstream rest(stripped.substr(colon + 1));
    while (std::getline(rest, tag, ',')) {
      auto t = trim(tag);
      if (!t.empty()) tags.push_back(t);
    }
    if (name.empty() || tags.empty())
      throw ConfigError("dimension map line needs a name and at least one tag: " +
                        stripped);
    map.emplace_back(std::move(name), std::move(tags));
  }
  return map;
}

DimensionMap parse_dimension_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dimension map: " + path.string());
  std::ostringstream body;
  body << in.rdbuf();
  return parse_dimension_map_text(body.str());
}

DimensionAccumulator::DimensionAccumulator(DimensionMap dimension_map)
    : map_(std::move(dimension_map)), cells_(map_.size()) {
  normalized_tags_.reserve(map_.size());
  for (const auto& [name, tags] : map_) {
    std::vector<std::string> normalized;
    normalized.reserve(tags.size());
    for (const auto& t : tags) normalized.push_back(normalize_tag(t));
    normalized_tags_.push_back(std::move(normalized));
  }
}

void DimensionAccumulator::add(const std::string& model,
                               const std::vector<Criterion>& criteria,
                               const std::vector<Judgment>& judgments) {
  if (criteria.size() != judgments.size())
    throw LengthMismatch("dimension profile: " + std::to_string(judgments.size()) +
                         " judgments for " + std::to_string(criteria.size()) +
                         " criteria");

  std::vector<std::set<std::string>> criterion_tags(criteria.size());
  for (size_t i = 0; i < criteria.size(); ++i) {
    for (const auto& tag : criteria[i].tags) {
      try {
        criterion_tags[i].insert(normalize_tag(tag));
      } catch (const EmptyTag&) {
      }
    }
  }

  for (size_t d = 0; d < map_.size(); ++d) {
    Cell& cell = cells_[d][model];
    for (size_t i = 0; i < criteria.size(); ++i) {
      bool matched = false;
      for (const auto& t : normalized_tags_[d]) {
        if (criterion_tags[i].count(t)) {
          matched = true;
          break;
        }
      }
      if (!matched) continue;
      cell.awarded += judgments[i].awarded;
      if (criteria[i].points > 0) cell.possible += criteria[i].points;
    }
  }
}

std::vector<DimensionProfile> DimensionAccumulator::profiles() const {
  std::vector<DimensionProfile> out;
  out.reserve(map_.size());
  for (size_t d = 0; d < map_.size(); ++d) {
    DimensionProfile profile;
    profile.dimension = map_[d].first;
    bool any = false;
    for (const auto& [model, cell] : cells_[d]) {
      if (cell.possible <= 0) continue;
      double value = static_cast<double>(cell.awarded) /
                     static_cast<double>(cell.possible);
      profile.by_model[model] = std::min(1.0, std::max(0.0, value));
      any = true;
    }
    if (!any)
      throw EmptyDimension("dimension '" + map_[d].first +
                           "' matched no criterion with positive points");
    out.push_back(std::move(profile));
  }
  return out;
}

std::vector<DimensionProfile> dimension_profiles(
    const DimensionMap& dimension_map, const std::vector<Criterion>& criteria,
    const std::map<std::string, std::vector<Judgment>>& judgments_by_model) {
  DimensionAccumulator acc(dimension_map);
  for (const auto& [model, judgments] : judgments_by_model)
    acc.add(model, criteria, judgments);
  return acc.profiles();
}

}  // namespace rubrictree
