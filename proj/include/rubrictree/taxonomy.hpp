#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rubrictree/core.hpp"

namespace rubrictree {

/// Case-folded, whitespace-collapsed, surrounding punctuation stripped.
/// Interior punctuation (hyphens) is kept. Throws EmptyTag when nothing
/// survives.
std::string normalize_tag(const std::string& tag);

/// 1 - editdistance(a,b) / max(|a|,|b|), unit-cost insert/delete/substitute.
double levenshtein_similarity(std::string_view a, std::string_view b);

/// Deterministic suffix-stripping stem (see stemmer.cpp for the rule table).
std::string stem(std::string_view word);

struct TagGraph {
  struct Node {
    std::string tag;
    long long count = 0;
  };
  struct Edge {
    size_t u = 0;
    size_t v = 0;
    std::string reason;  // "stem-overlap" | "levenshtein"
  };
  std::vector<Node> nodes;  // sorted by tag
  std::vector<Edge> edges;  // u < v, no parallel edges
};

/// Nodes are canonical tags with accumulated counts. Edge (u,v) iff the
/// tags share a word stem (multi-word tags stem their words pairwise) or
/// whole-string Levenshtein similarity exceeds the threshold (strict).
/// Degenerate tags that normalize to nothing are skipped.
TagGraph build_tag_graph(const std::vector<std::pair<std::string, long long>>& occurrences,
                         double threshold = 0.85);

/// Unweighted undirected modularity of a node partition, resolution 1.
double modularity(const TagGraph& graph,
                  const std::vector<std::vector<std::string>>& partition);

/// Greedy agglomerative modularity maximization: start from singletons,
/// repeatedly merge the connected pair with the largest positive gain, stop
/// when no merge improves. Ties break on the lexicographically smallest
/// merged-community label (a community's label is its smallest member tag).
/// Clusters come back internally sorted and ordered by first member.
std::vector<std::vector<std::string>> detect_communities(const TagGraph& graph);

/// Highest cumulative frequency wins; ties break lexicographically.
std::string representative_label(const std::vector<std::string>& cluster,
                                 const std::map<std::string, long long>& freqs);

using DimensionMap = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// One dimension per line: "name: tag, tag, tag". '#' comments and blank
/// lines ignored.
DimensionMap parse_dimension_map(const std::filesystem::path& path);
DimensionMap parse_dimension_map_text(const std::string& text);

struct DimensionProfile {
  std::string dimension;
  /// model -> achieved-points / possible-points over criteria whose tags
  /// intersect the dimension, clamped into [0,1]
  std::map<std::string, double> by_model;
};

/// Accumulates (criteria, judgments) pairs across questions and models.
class DimensionAccumulator {
public:
  explicit DimensionAccumulator(DimensionMap dimension_map);

  /// judgments must align index-wise with criteria.
  void add(const std::string& model, const std::vector<Criterion>& criteria,
           const std::vector<Judgment>& judgments);

  /// Throws EmptyDimension if any dimension matched no criterion or has no
  /// positive possible points.
  std::vector<DimensionProfile> profiles() const;

private:
  struct Cell {
    long long awarded = 0;
    long long possible = 0;
  };
  DimensionMap map_;
  std::vector<std::vector<std::string>> normalized_tags_;  // per dimension
  std::vector<std::map<std::string, Cell>> cells_;         // per dimension, by model
};

/// Single-shot convenience over one criteria set.
std::vector<DimensionProfile> dimension_profiles(
    const DimensionMap& dimension_map, const std::vector<Criterion>& criteria,
    const std::map<std::string, std::vector<Judgment>>& judgments_by_model);

}  // namespace rubrictree
