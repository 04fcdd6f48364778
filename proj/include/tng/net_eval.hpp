#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace tng {

using GeneEdge = std::pair<std::string, std::string>;
using InferredNetwork = std::map<GeneEdge, double>;

struct GoldStandard {
  std::set<GeneEdge> edges;
  std::set<std::string> gene_set;  // every gene appearing in an edge

  void add(const std::string& regulator, const std::string& target);
};

// TSV `regulator_gene\ttarget_gene`; a leading canonical header row is
// skipped when present.
GoldStandard load_gold_standard(const std::string& file);

// Keeps only edges with BOTH endpoints inside gold.gene_set intersected with
// `expressed_genes`, applied to both networks.
std::pair<InferredNetwork, GoldStandard> filter_to_intersection(
    const InferredNetwork& inferred, const GoldStandard& gold,
    const std::set<std::string>& expressed_genes);

struct RankedEdge {
  GeneEdge edge;
  double confidence = 0.0;
};

// Descending confidence, ties lexicographic on (src, dst); optionally
// truncated to max_edges.
std::vector<RankedEdge> rank_and_truncate(const InferredNetwork& inferred,
                                          std::optional<int> max_edges);

struct PrPoint {
  int rank = 0;
  bool hit = false;
  double recall = 0.0;
  double precision = 0.0;
};

struct EvalReport {
  int inferred_count = 0;
  int gold_count = 0;
  std::vector<PrPoint> points;
  double area = 0.0;  // average precision of the stepwise PR curve
};

// Walks the ranking edge by edge; at each rank where a gold edge appears the
// running precision contributes 1/|gold| of itself to the area. Edges missing
// from the ranking cap the reachable recall, and thereby the area.
EvalReport fscore_area(const std::vector<RankedEdge>& ranked, const GoldStandard& gold);

// Folds both directions of every edge into a canonical ordering so directed
// and reversed predictions/gold entries compare equal.
InferredNetwork symmetrize(const InferredNetwork& inferred);
GoldStandard symmetrize(const GoldStandard& gold);

}  // namespace tng
