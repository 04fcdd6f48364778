#include "tng/analysis.hpp"

#include <algorithm>
#include <numeric>

#include "tng/error.hpp"
#include "tng/util.hpp"

namespace tng {

RankedPaths extract_top_paths(const ParamStore& params, const PathList& paths,
                              const GeneGraph& graph, int k) {
  if (k < 1) throw UsageError("extract_top_paths: k must be >= 1");
  const Matrix& logits = params.at("head.path_logits");
  if (logits.cols() != paths.p())
    throw DataError("extract_top_paths: path logit count does not match path list");
  const Vector importance = path_importance_values(logits);

  std::vector<int> order(static_cast<std::size_t>(paths.p()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (importance[a] != importance[b]) return importance[a] > importance[b];
    return a < b;
  });

  RankedPaths ranked;
  if (k > paths.p()) {
    warn("extract_top_paths: k=" + std::to_string(k) + " exceeds " +
         std::to_string(paths.p()) + " paths; returning all");
    ranked.clipped_to_available = true;
    k = paths.p();
  }
  for (int rank = 0; rank < k; ++rank) {
    const int m = order[static_cast<std::size_t>(rank)];
    RankedPathEntry entry;
    entry.index = m;
    entry.path_id = paths.ids[static_cast<std::size_t>(m)];
    entry.importance = importance[m];
    entry.nodes = paths.paths[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < entry.nodes.size(); ++i) {
      if (i) entry.rendered += " -> ";
      const Gene& g = graph.genes()[static_cast<std::size_t>(entry.nodes[i])];
      entry.rendered += g.symbol.empty() ? g.id : g.symbol;
    }
    ranked.entries.push_back(std::move(entry));
  }
  return ranked;
}

EdgeConfidence paths_to_edge_confidence(const RankedPaths& ranked, const GeneGraph& graph) {
  EdgeConfidence edges;
  auto name = [&](int node) -> std::string {
    const Gene& g = graph.genes()[static_cast<std::size_t>(node)];
    return g.symbol.empty() ? g.id : g.symbol;
  };
  for (const RankedPathEntry& entry : ranked.entries) {
    for (std::size_t i = 0; i + 1 < entry.nodes.size(); ++i) {
      const auto key = std::make_pair(name(entry.nodes[i]), name(entry.nodes[i + 1]));
      auto [it, inserted] = edges.emplace(key, entry.importance);
      if (!inserted) it->second = std::max(it->second, entry.importance);
    }
  }
  return edges;
}

double cell_importance(const PopulationProfile& profile, double alpha) {
  if (alpha < 0.0) throw UsageError("cell_importance: alpha must be >= 0");
  if (profile.mean_expr_diseased.size() != profile.mean_expr_healthy.size())
    throw DataError("cell_importance: mean expression lengths differ");
  double expression_term = 0.0;
  for (Index j = 0; j < profile.mean_expr_diseased.size(); ++j)
    expression_term += std::abs(profile.mean_expr_diseased[j] - profile.mean_expr_healthy[j]);
  const double frequency_term =
      std::abs(static_cast<double>(profile.count_diseased - profile.count_healthy));
  return alpha * frequency_term + expression_term;
}

namespace {

Vector mean_graph_embedding(const ParamStore& params, const TrainConfig& config,
                            const ModelInputs& inputs, const ExpressionDataset& dataset,
                            const std::vector<int>& cell_indices) {
  Tape tape;
  const StagedModel staged = stage_model(tape, params, config, inputs);
  Vector mean = Vector::Zero(config.h_emb);
  for (int idx : cell_indices) {
    const CellForward fwd = forward_cell(tape, staged, config, inputs,
                                         dataset.cells.at(static_cast<std::size_t>(idx)).expression);
    mean += tape.value(fwd.graph_embedding).row(0).transpose();
  }
  return mean / static_cast<double>(cell_indices.size());
}

}  // namespace

Vector population_embedding(const ParamStore& params, const TrainConfig& config,
                            const ModelInputs& inputs, const ExpressionDataset& dataset,
                            const std::string& population) {
  std::vector<int> indices;
  for (std::size_t i = 0; i < dataset.cells.size(); ++i)
    if (dataset.cells[i].population == population) indices.push_back(static_cast<int>(i));
  if (indices.empty())
    throw DataError("population_embedding: no cells tagged '" + population + "'");
  return mean_graph_embedding(params, config, inputs, dataset, indices);
}

std::vector<PopulationProfile> build_population_profiles(const ParamStore& params,
                                                         const TrainConfig& config,
                                                         const ModelInputs& inputs,
                                                         const ExpressionDataset& dataset) {
  std::vector<std::string> tags;
  std::map<std::string, std::vector<int>> members;
  for (std::size_t i = 0; i < dataset.cells.size(); ++i) {
    const std::string& tag = dataset.cells[i].population;
    if (tag.empty()) {
      warn("cell '" + dataset.cells[i].id + "' has no population tag; skipped");
      continue;
    }
    if (!members.count(tag)) tags.push_back(tag);
    members[tag].push_back(static_cast<int>(i));
  }
  if (tags.empty()) throw DataError("no population tags in dataset");

  std::vector<PopulationProfile> profiles;
  for (const std::string& tag : tags) {
    const std::vector<int>& indices = members[tag];
    PopulationProfile profile;
    profile.population = tag;
    profile.mean_expr_diseased = Vector::Zero(dataset.n_genes);
    profile.mean_expr_healthy = Vector::Zero(dataset.n_genes);
    bool time_set = false;
    for (int idx : indices) {
      const CellRecord& cell = dataset.cells.at(static_cast<std::size_t>(idx));
      if (cell.label == 1) {
        ++profile.count_diseased;
        profile.mean_expr_diseased += cell.expression;
      } else {
        ++profile.count_healthy;
        profile.mean_expr_healthy += cell.expression;
      }
      if (cell.time) {
        if (time_set && profile.time && *profile.time != *cell.time)
          throw DataError("population '" + tag + "' has inconsistent time annotations");
        profile.time = cell.time;
        time_set = true;
      }
    }
    if (profile.count_diseased > 0)
      profile.mean_expr_diseased /= static_cast<double>(profile.count_diseased);
    if (profile.count_healthy > 0)
      profile.mean_expr_healthy /= static_cast<double>(profile.count_healthy);
    profile.embedding = mean_graph_embedding(params, config, inputs, dataset, indices);
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

double cosine_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DataError("cosine_distance: lengths differ");
  const double norm_a = a.norm();
  const double norm_b = b.norm();
  if (norm_a == 0.0 || norm_b == 0.0)
    throw NumericError("cosine_distance: zero vector");
  return 1.0 - a.dot(b) / (norm_a * norm_b);
}

std::vector<MstEdge> build_mst(const Matrix& distances) {
  const Index n = distances.rows();
  if (n < 2) throw DataError("build_mst: need at least 2 nodes");
  if (distances.cols() != n) throw DataError("build_mst: matrix not square");
  if (!distances.allFinite()) throw NumericError("build_mst: non-finite distances");

  std::vector<MstEdge> candidates;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      candidates.push_back({static_cast<int>(i), static_cast<int>(j), distances(i, j)});
  std::sort(candidates.begin(), candidates.end(), [](const MstEdge& a, const MstEdge& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };

  std::vector<MstEdge> tree;
  for (const MstEdge& e : candidates) {
    const int root_i = find(e.i);
    const int root_j = find(e.j);
    if (root_i == root_j) continue;
    parent[static_cast<std::size_t>(root_i)] = root_j;
    tree.push_back(e);
    if (static_cast<Index>(tree.size()) == n - 1) break;
  }
  return tree;
}

std::vector<OrientedEdge> prune_by_time(const std::vector<MstEdge>& tree,
                                        const std::vector<std::optional<double>>& times,
                                        int target, int node_count) {
  if (target < 0 || target >= node_count) throw DataError("prune_by_time: target out of range");
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(node_count));
  for (const MstEdge& e : tree) {
    adjacency[static_cast<std::size_t>(e.i)].push_back(e.j);
    adjacency[static_cast<std::size_t>(e.j)].push_back(e.i);
  }
  // Root the tree at the target; each non-root node's edge points to its
  // parent, i.e. one hop along the unique path toward the target.
  std::vector<int> toward_target(static_cast<std::size_t>(node_count), -1);
  std::vector<bool> visited(static_cast<std::size_t>(node_count), false);
  std::vector<int> frontier{target};
  visited[static_cast<std::size_t>(target)] = true;
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int node : frontier)
      for (int neighbor : adjacency[static_cast<std::size_t>(node)])
        if (!visited[static_cast<std::size_t>(neighbor)]) {
          visited[static_cast<std::size_t>(neighbor)] = true;
          toward_target[static_cast<std::size_t>(neighbor)] = node;
          next.push_back(neighbor);
        }
    frontier = std::move(next);
  }

  std::vector<OrientedEdge> retained;
  for (const MstEdge& e : tree) {
    const int src = toward_target[static_cast<std::size_t>(e.i)] == e.j ? e.i : e.j;
    const int dst = src == e.i ? e.j : e.i;
    const auto& time_src = times.at(static_cast<std::size_t>(src));
    const auto& time_dst = times.at(static_cast<std::size_t>(dst));
    if (!time_src || !time_dst)
      throw DataError("prune_by_time: missing time annotation on a tree node");
    if (*time_src < *time_dst) retained.push_back({src, dst});
  }
  return retained;
}

TrajectoryGraph build_trajectory(const std::vector<PopulationProfile>& profiles,
                                 const std::string& target_population) {
  if (profiles.size() < 2) throw DataError("build_trajectory: need at least 2 populations");
  TrajectoryGraph trajectory;
  trajectory.target = -1;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    trajectory.populations.push_back(profiles[i].population);
    if (profiles[i].population == target_population) trajectory.target = static_cast<int>(i);
  }
  if (trajectory.target < 0)
    throw DataError("build_trajectory: unknown target population '" + target_population + "'");

  const Index n = static_cast<Index>(profiles.size());
  Matrix distances = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double d = cosine_distance(profiles[static_cast<std::size_t>(i)].embedding,
                                       profiles[static_cast<std::size_t>(j)].embedding);
      distances(i, j) = d;
      distances(j, i) = d;
    }
  trajectory.mst_edges = build_mst(distances);

  std::vector<std::optional<double>> times;
  for (const PopulationProfile& profile : profiles) times.push_back(profile.time);
  trajectory.pruned_edges =
      prune_by_time(trajectory.mst_edges, times, trajectory.target, static_cast<int>(n));
  return trajectory;
}

}  // namespace tng
