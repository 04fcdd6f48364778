#include "tng/graph.hpp"

#include <algorithm>
#include <set>

#include "tng/error.hpp"
#include "tng/rng.hpp"

namespace tng {

namespace {

std::uint64_t pair_key(int src, int dst) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(src)) << 32) |
         static_cast<std::uint32_t>(dst);
}

std::uint64_t hash_string(std::uint64_t h, const std::string& s) {
  h = fnv1a64(s.data(), s.size(), h);
  const char zero = '\0';
  return fnv1a64(&zero, 1, h);
}

std::uint64_t hash_i64(std::uint64_t h, std::int64_t v) {
  return fnv1a64(&v, sizeof(v), h);
}

}  // namespace

GeneGraph::GeneGraph(std::vector<Gene> genes, std::vector<GraphEdge> edges)
    : genes_(std::move(genes)), edges_(std::move(edges)) {
  for (int i = 0; i < n(); ++i) {
    if (!index_by_id_.emplace(genes_[i].id, i).second)
      throw DataError("duplicate gene_id '" + genes_[i].id + "'");
  }
  int max_type = 0;
  for (const GraphEdge& e : edges_) {
    if (e.src < 0 || e.src >= n() || e.dst < 0 || e.dst >= n())
      throw DataError("edge endpoint out of range");
    if (e.type < 0) throw DataError("negative edge_type");
    if (!type_by_pair_.emplace(pair_key(e.src, e.dst), e.type).second)
      throw DataError("duplicate edge (" + genes_[e.src].id + ", " + genes_[e.dst].id + ")");
    max_type = std::max(max_type, e.type);
  }
  edge_type_count_ = max_type + 1;
}

std::optional<int> GeneGraph::find_gene(const std::string& gene_id) const {
  auto it = index_by_id_.find(gene_id);
  if (it == index_by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> GeneGraph::edge_type(int src, int dst) const {
  auto it = type_by_pair_.find(pair_key(src, dst));
  if (it == type_by_pair_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t GeneGraph::fingerprint() const {
  std::uint64_t h = fnv1a64("gene-graph", 10);
  for (const Gene& g : genes_) {
    h = hash_string(h, g.id);
    h = hash_string(h, g.symbol);
    h = hash_string(h, g.description);
  }
  for (const GraphEdge& e : edges_) {
    h = hash_i64(h, e.src);
    h = hash_i64(h, e.dst);
    h = hash_i64(h, e.type);
  }
  return h;
}

std::vector<int> PathList::lengths() const {
  std::vector<int> lens;
  lens.reserve(paths.size());
  for (const auto& nodes : paths) lens.push_back(static_cast<int>(nodes.size()));
  return lens;
}

std::uint64_t PathList::fingerprint() const {
  std::uint64_t h = fnv1a64("path-list", 9);
  for (std::size_t m = 0; m < paths.size(); ++m) {
    h = hash_string(h, m < ids.size() ? ids[m] : std::string());
    for (int node : paths[m]) h = hash_i64(h, node);
    h = hash_i64(h, -1);
  }
  return h;
}

std::pair<std::vector<int>, std::vector<int>> compute_degrees(const GeneGraph& graph) {
  std::vector<int> in_degree(static_cast<std::size_t>(graph.n()), 0);
  std::vector<int> out_degree(static_cast<std::size_t>(graph.n()), 0);
  for (const GraphEdge& e : graph.edges()) {
    ++out_degree[static_cast<std::size_t>(e.src)];
    ++in_degree[static_cast<std::size_t>(e.dst)];
  }
  return {in_degree, out_degree};
}

std::vector<PathViolation> validate_paths(const PathList& paths, const GeneGraph& graph) {
  std::vector<PathViolation> violations;
  for (int m = 0; m < paths.p(); ++m) {
    const auto& nodes = paths.paths[static_cast<std::size_t>(m)];
    if (nodes.size() < 2) {
      violations.push_back({m, 0, "path too short"});
      continue;
    }
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      if (!graph.edge_type(nodes[i], nodes[i + 1]).has_value()) {
        violations.push_back({m, static_cast<int>(i),
                              "no edge " + graph.genes()[static_cast<std::size_t>(nodes[i])].id +
                                  " -> " +
                                  graph.genes()[static_cast<std::size_t>(nodes[i + 1])].id});
      }
    }
  }
  return violations;
}

ScatterIndex build_scatter_index(const PathList& paths, const GeneGraph& graph) {
  ScatterIndex index;
  index.terminal_type = graph.edge_type_count();
  for (int m = 0; m < paths.p(); ++m) {
    const auto& nodes = paths.paths[static_cast<std::size_t>(m)];
    if (nodes.size() < 2) throw DataError("path " + std::to_string(m) + " too short");
    index.max_path_len = std::max(index.max_path_len, static_cast<int>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      index.flat_nodes.push_back(nodes[i]);
      index.segment_ids.push_back(m);
      index.positions.push_back(static_cast<int>(i));
      if (i + 1 < nodes.size()) {
        const auto type = graph.edge_type(nodes[i], nodes[i + 1]);
        if (!type)
          throw DataError("path " + std::to_string(m) + " uses missing edge at position " +
                          std::to_string(i));
        index.pair_edge_types.push_back(*type);
      } else {
        index.pair_edge_types.push_back(index.terminal_type);
      }
    }
  }
  index.k = static_cast<int>(index.flat_nodes.size());
  return index;
}

SyntheticData synthesize_dataset(int n_genes, int n_paths, int n_cells, int signal_path_id,
                                 double effect_size, std::uint64_t seed) {
  if (n_genes < 2 || n_paths < 1 || n_cells < 1)
    throw DataError("synthesize_dataset: counts must be positive");
  if (signal_path_id < 0 || signal_path_id >= n_paths)
    throw DataError("synthesize_dataset: signal_path_id out of range");
  if (effect_size < 0.0) throw DataError("synthesize_dataset: negative effect_size");

  Rng rng(seed);

  std::vector<Gene> genes;
  genes.reserve(static_cast<std::size_t>(n_genes));
  for (int i = 0; i < n_genes; ++i) {
    Gene g;
    g.id = "g" + std::to_string(i);
    g.symbol = "SYN" + std::to_string(i);
    if (i % 2 == 0)
      g.description = "Synthetic gene SYN" + std::to_string(i) +
                      " generated for pipeline validation.";
    genes.push_back(g);
  }

  // A random permutation serves as topological order; paths walk forward in
  // it, so the union of their edges is a DAG by construction.
  std::vector<int> rank(static_cast<std::size_t>(n_genes));
  for (int i = 0; i < n_genes; ++i) rank[static_cast<std::size_t>(i)] = i;
  rng.shuffle(rank);

  PathList paths;
  std::set<std::vector<int>> seen;
  const int max_len = std::min(6, n_genes);
  const int min_len = std::min(3, max_len);
  for (int m = 0; m < n_paths; ++m) {
    std::vector<int> nodes;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const int len = rng.uniform_int(min_len, max_len);
      std::set<int> picked;
      while (static_cast<int>(picked.size()) < len)
        picked.insert(rng.uniform_int(0, n_genes - 1));
      nodes.assign(picked.begin(), picked.end());
      std::sort(nodes.begin(), nodes.end(), [&](int a, int b) {
        return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)];
      });
      if (seen.insert(nodes).second) break;
      nodes.clear();
    }
    if (nodes.empty()) throw DataError("synthesize_dataset: could not sample distinct paths");
    paths.ids.push_back("path" + std::to_string(m));
    paths.paths.push_back(nodes);
  }

  std::vector<GraphEdge> edges;
  std::set<std::pair<int, int>> edge_set;
  for (const auto& nodes : paths.paths)
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
      if (edge_set.emplace(nodes[i], nodes[i + 1]).second)
        edges.push_back({nodes[i], nodes[i + 1], rng.uniform_int(0, 1)});
  // A few extra forward edges so the graph is not just the path union.
  for (int extra = 0; extra < n_genes / 2; ++extra) {
    int a = rng.uniform_int(0, n_genes - 1);
    int b = rng.uniform_int(0, n_genes - 1);
    if (a == b) continue;
    if (rank[static_cast<std::size_t>(a)] > rank[static_cast<std::size_t>(b)]) std::swap(a, b);
    if (edge_set.emplace(a, b).second) edges.push_back({a, b, rng.uniform_int(0, 1)});
  }

  GeneGraph graph(std::move(genes), std::move(edges));

  const auto& signal_genes = paths.paths[static_cast<std::size_t>(signal_path_id)];
  ExpressionDataset dataset;
  dataset.n_genes = n_genes;
  for (int c = 0; c < n_cells; ++c) {
    CellRecord cell;
    cell.id = "cell" + std::to_string(c);
    cell.label = rng.coin() ? 1 : 0;
    cell.expression = Vector(n_genes);
    for (int g = 0; g < n_genes; ++g) cell.expression[g] = rng.normal();
    if (cell.label == 1)
      for (int g : signal_genes) cell.expression[g] += effect_size;
    const int stage = c % 4;
    cell.population = "pop" + std::to_string(stage);
    cell.time = static_cast<double>(stage);
    dataset.cells.push_back(std::move(cell));
  }

  return SyntheticData{std::move(graph), std::move(paths), std::move(dataset), signal_path_id};
}

}  // namespace tng
