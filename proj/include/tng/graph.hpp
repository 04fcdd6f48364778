#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tng/types.hpp"

namespace tng {

struct Gene {
  std::string id;
  std::string symbol;
  std::string description;  // empty means none
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  int type = 0;
};

// Directed gene network. Node indices follow gene-file order; immutable after
// construction.
class GeneGraph {
 public:
  GeneGraph() = default;
  GeneGraph(std::vector<Gene> genes, std::vector<GraphEdge> edges);

  int n() const { return static_cast<int>(genes_.size()); }
  const std::vector<Gene>& genes() const { return genes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  // Distinct edge-type codes are 0..edge_type_count()-1.
  int edge_type_count() const { return edge_type_count_; }

  std::optional<int> find_gene(const std::string& gene_id) const;
  // Edge type of (src, dst), or nullopt when no such edge exists.
  std::optional<int> edge_type(int src, int dst) const;

  std::uint64_t fingerprint() const;

 private:
  std::vector<Gene> genes_;
  std::vector<GraphEdge> edges_;
  std::unordered_map<std::string, int> index_by_id_;
  std::unordered_map<std::uint64_t, int> type_by_pair_;
  int edge_type_count_ = 1;
};

struct PathList {
  std::vector<std::string> ids;
  std::vector<std::vector<int>> paths;

  int p() const { return static_cast<int>(paths.size()); }
  std::vector<int> lengths() const;
  std::uint64_t fingerprint() const;
};

// Flattened path-major, position-minor view of the path list. The entry at
// the end of each path carries the reserved TERMINAL pair type
// (== graph.edge_type_count()).
struct ScatterIndex {
  std::vector<int> flat_nodes;
  std::vector<int> segment_ids;
  std::vector<int> positions;
  std::vector<int> pair_edge_types;
  int k = 0;
  int terminal_type = 0;
  int max_path_len = 0;
};

struct CellRecord {
  std::string id;
  Vector expression;
  int label = 0;
  std::string population;  // empty means untagged
  std::optional<double> time;
};

struct ExpressionDataset {
  std::vector<CellRecord> cells;
  int n_genes = 0;
};

struct PathViolation {
  int path = 0;
  int position = 0;
  std::string what;
};

std::pair<std::vector<int>, std::vector<int>> compute_degrees(const GeneGraph& graph);

// Every (path, position) whose consecutive pair is not a graph edge, plus
// too-short paths. Violations are data, not exceptions.
std::vector<PathViolation> validate_paths(const PathList& paths, const GeneGraph& graph);

ScatterIndex build_scatter_index(const PathList& paths, const GeneGraph& graph);

struct SyntheticData {
  GeneGraph graph;
  PathList paths;
  ExpressionDataset dataset;
  int signal_path = 0;
};

// Plants `effect_size` of expression shift on the signal path's genes for
// label-1 cells, on top of unit-variance noise everywhere. The graph is a
// random DAG covering every path edge. Deterministic in `seed`.
SyntheticData synthesize_dataset(int n_genes, int n_paths, int n_cells, int signal_path_id,
                                 double effect_size, std::uint64_t seed);

}  // namespace tng
