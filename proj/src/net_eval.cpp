#include "tng/net_eval.hpp"

#include <algorithm>

#include "tng/error.hpp"
#include "tng/util.hpp"

namespace tng {

void GoldStandard::add(const std::string& regulator, const std::string& target) {
  edges.emplace(regulator, target);
  gene_set.insert(regulator);
  gene_set.insert(target);
}

GoldStandard load_gold_standard(const std::string& file) {
  GoldStandard gold;
  const auto lines = read_lines(file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 2)
      throw DataError(file + ":" + std::to_string(i + 1) + ": expected 2 tab-separated fields");
    if (i == 0 && fields[0] == "regulator_gene" && fields[1] == "target_gene") continue;
    gold.add(trim(fields[0]), trim(fields[1]));
  }
  if (gold.edges.empty()) throw DataError(file + ": no gold edges");
  return gold;
}

std::pair<InferredNetwork, GoldStandard> filter_to_intersection(
    const InferredNetwork& inferred, const GoldStandard& gold,
    const std::set<std::string>& expressed_genes) {
  std::set<std::string> keep;
  for (const std::string& gene : gold.gene_set)
    if (expressed_genes.count(gene)) keep.insert(gene);

  InferredNetwork filtered_inferred;
  for (const auto& [edge, confidence] : inferred)
    if (keep.count(edge.first) && keep.count(edge.second))
      filtered_inferred.emplace(edge, confidence);

  GoldStandard filtered_gold;
  for (const GeneEdge& edge : gold.edges)
    if (keep.count(edge.first) && keep.count(edge.second)) filtered_gold.add(edge.first, edge.second);
  if (filtered_gold.edges.empty())
    throw DataError("filter_to_intersection: nothing to evaluate (filtered gold is empty)");
  return {std::move(filtered_inferred), std::move(filtered_gold)};
}

std::vector<RankedEdge> rank_and_truncate(const InferredNetwork& inferred,
                                          std::optional<int> max_edges) {
  std::vector<RankedEdge> ranked;
  ranked.reserve(inferred.size());
  for (const auto& [edge, confidence] : inferred) ranked.push_back({edge, confidence});
  std::sort(ranked.begin(), ranked.end(), [](const RankedEdge& a, const RankedEdge& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.edge < b.edge;
  });
  if (max_edges && static_cast<int>(ranked.size()) > *max_edges)
    ranked.resize(static_cast<std::size_t>(*max_edges));
  return ranked;
}

EvalReport fscore_area(const std::vector<RankedEdge>& ranked, const GoldStandard& gold) {
  if (gold.edges.empty()) throw DataError("fscore_area: empty gold standard");
  EvalReport report;
  report.inferred_count = static_cast<int>(ranked.size());
  report.gold_count = static_cast<int>(gold.edges.size());
  const double gold_size = static_cast<double>(gold.edges.size());
  int hits = 0;
  for (std::size_t t = 0; t < ranked.size(); ++t) {
    const bool hit = gold.edges.count(ranked[t].edge) > 0;
    if (hit) ++hits;
    PrPoint point;
    point.rank = static_cast<int>(t + 1);
    point.hit = hit;
    point.recall = static_cast<double>(hits) / gold_size;
    point.precision = static_cast<double>(hits) / static_cast<double>(t + 1);
    if (hit) report.area += point.precision / gold_size;
    report.points.push_back(point);
  }
  return report;
}

InferredNetwork symmetrize(const InferredNetwork& inferred) {
  InferredNetwork out;
  for (const auto& [edge, confidence] : inferred) {
    GeneEdge key = edge.first <= edge.second ? edge : GeneEdge{edge.second, edge.first};
    auto [it, inserted] = out.emplace(key, confidence);
    if (!inserted) it->second = std::max(it->second, confidence);
  }
  return out;
}

GoldStandard symmetrize(const GoldStandard& gold) {
  GoldStandard out;
  for (const GeneEdge& edge : gold.edges) {
    if (edge.first <= edge.second)
      out.add(edge.first, edge.second);
    else
      out.add(edge.second, edge.first);
  }
  return out;
}

}  // namespace tng
