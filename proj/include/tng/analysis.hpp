#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tng/model.hpp"

namespace tng {

struct RankedPathEntry {
  int index = 0;  // position in the PathList
  std::string path_id;
  double importance = 0.0;
  std::vector<int> nodes;
  std::string rendered;  // arrow-joined gene symbols
};

struct RankedPaths {
  std::vector<RankedPathEntry> entries;
  bool clipped_to_available = false;  // k exceeded the path count
};

// Top-k paths by sigmoid(M), descending; ties break by ascending path index.
RankedPaths extract_top_paths(const ParamStore& params, const PathList& paths,
                              const GeneGraph& graph, int k);

using EdgeConfidence = std::map<std::pair<std::string, std::string>, double>;

// Every consecutive pair in every ranked path contributes; an edge's
// confidence is the maximum importance over the paths containing it.
EdgeConfidence paths_to_edge_confidence(const RankedPaths& ranked, const GeneGraph& graph);

struct PopulationProfile {
  std::string population;
  long count_diseased = 0;
  long count_healthy = 0;
  Vector mean_expr_diseased;
  Vector mean_expr_healthy;
  Vector embedding;  // mean per-cell graph embedding
  std::optional<double> time;
};

// alpha * |count difference| + sum over genes of |mean expression difference|.
double cell_importance(const PopulationProfile& profile, double alpha);

// Mean final graph embedding over the population's cells.
Vector population_embedding(const ParamStore& params, const TrainConfig& config,
                            const ModelInputs& inputs, const ExpressionDataset& dataset,
                            const std::string& population);

// One profile per population tag, in first-appearance order. A population's
// time annotation must be consistent across its cells.
std::vector<PopulationProfile> build_population_profiles(const ParamStore& params,
                                                         const TrainConfig& config,
                                                         const ModelInputs& inputs,
                                                         const ExpressionDataset& dataset);

// 1 - cos(v_i, v_j), in [0, 2].
double cosine_distance(const Vector& a, const Vector& b);

struct MstEdge {
  int i = 0;
  int j = 0;
  double distance = 0.0;
};

// Minimum spanning tree of a complete symmetric distance matrix; ties break
// lexicographically on (i, j) for determinism.
std::vector<MstEdge> build_mst(const Matrix& distances);

struct OrientedEdge {
  int src = 0;
  int dst = 0;
};

// Orients every tree edge along the unique tree path toward `target` and
// keeps those whose time strictly increases in that direction.
std::vector<OrientedEdge> prune_by_time(const std::vector<MstEdge>& tree,
                                        const std::vector<std::optional<double>>& times,
                                        int target, int node_count);

struct TrajectoryGraph {
  std::vector<std::string> populations;
  std::vector<MstEdge> mst_edges;
  std::vector<OrientedEdge> pruned_edges;
  int target = 0;
};

TrajectoryGraph build_trajectory(const std::vector<PopulationProfile>& profiles,
                                 const std::string& target_population);

}  // namespace tng
