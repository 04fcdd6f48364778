#include <doctest.h>

#include <cmath>
#include <set>

#include "tng/analysis.hpp"
#include "tng/error.hpp"
#include "tng/rng.hpp"

using namespace tng;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

EmbeddingStore mock_store(const GeneGraph& graph, const PathList& paths, int d_llm) {
  EmbeddingStore store;
  store.d_llm = d_llm;
  for (const Gene& gene : graph.genes())
    store.set_gene(gene.id, mock_embed(describe_gene(gene), d_llm, 1));
  for (int m = 0; m < paths.p(); ++m)
    store.set_path(paths.ids[static_cast<std::size_t>(m)],
                   mock_embed(describe_path(paths.paths[static_cast<std::size_t>(m)], graph),
                              d_llm, 1));
  return store;
}

TrainConfig tiny_config() {
  TrainConfig config;
  config.layers = 1;
  config.h_emb = 8;
  config.heads = 2;
  config.d_k = 4;
  config.r = 2;
  config.u = 4;
  config.d_llm = 8;
  config.d_expand = 3;
  config.d_max = 8;
  return config;
}

// All spanning trees by brute force; the oracle for build_mst.
double exhaustive_mst_weight(const Matrix& distances) {
  const int n = static_cast<int>(distances.rows());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  const int e = static_cast<int>(edges.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < (1ULL << e); ++mask) {
    if (__builtin_popcountll(mask) != n - 1) continue;
    std::vector<int> parent(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
    std::function<int(int)> find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
      return x;
    };
    double total = 0.0;
    int joined = 0;
    for (int b = 0; b < e; ++b) {
      if (!(mask & (1ULL << b))) continue;
      const auto [i, j] = edges[static_cast<std::size_t>(b)];
      const int ri = find(i), rj = find(j);
      if (ri != rj) {
        parent[static_cast<std::size_t>(ri)] = rj;
        ++joined;
      }
      total += distances(i, j);
    }
    if (joined == n - 1) best = std::min(best, total);
  }
  return best;
}

}  // namespace

TEST_CASE("extract_top_paths ranking and tie rules") {
  std::vector<Gene> genes;
  for (int i = 0; i < 4; ++i) genes.push_back({"g" + std::to_string(i), "S" + std::to_string(i), ""});
  GeneGraph graph(std::move(genes), {{0, 1, 0}, {1, 2, 0}, {2, 3, 0}});
  PathList paths;
  paths.ids = {"pa", "pb", "pc"};
  paths.paths = {{0, 1}, {1, 2}, {2, 3}};

  ParamStore params;
  Matrix logits(1, 3);
  logits << logit(0.9), logit(0.2), logit(0.5);
  params.values["head.path_logits"] = logits;

  const RankedPaths top2 = extract_top_paths(params, paths, graph, 2);
  REQUIRE(top2.entries.size() == 2);
  CHECK(top2.entries[0].index == 0);
  CHECK(top2.entries[1].index == 2);
  CHECK(top2.entries[0].importance == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(top2.entries[0].rendered == "S0 -> S1");

  params.values["head.path_logits"].setZero();
  const RankedPaths tied = extract_top_paths(params, paths, graph, 2);
  CHECK(tied.entries[0].index == 0);
  CHECK(tied.entries[1].index == 1);

  const RankedPaths full = extract_top_paths(params, paths, graph, 3);
  CHECK(full.entries.size() == 3);
  CHECK_FALSE(full.clipped_to_available);

  const RankedPaths clipped = extract_top_paths(params, paths, graph, 10);
  CHECK(clipped.entries.size() == 3);
  CHECK(clipped.clipped_to_available);
}

TEST_CASE("paths_to_edge_confidence takes the max over containing paths") {
  std::vector<Gene> genes;
  for (int i = 0; i < 5; ++i) genes.push_back({"g" + std::to_string(i), "S" + std::to_string(i), ""});
  GeneGraph graph(std::move(genes),
                  {{0, 1, 0}, {1, 2, 0}, {2, 3, 0}, {3, 4, 0}});
  PathList paths;
  paths.ids = {"pa", "pb"};
  paths.paths = {{0, 1, 2}, {1, 2, 3}};  // share edge S1 -> S2

  ParamStore params;
  Matrix logits(1, 2);
  logits << logit(0.9), logit(0.5);
  params.values["head.path_logits"] = logits;
  const RankedPaths ranked = extract_top_paths(params, paths, graph, 2);
  const EdgeConfidence edges = paths_to_edge_confidence(ranked, graph);
  CHECK(edges.at({"S1", "S2"}) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(edges.at({"S0", "S1"}) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(edges.at({"S2", "S3"}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(edges.size() == 3);

  // Disjoint paths: edge count is the sum of (length - 1).
  PathList disjoint;
  disjoint.ids = {"pa", "pb"};
  disjoint.paths = {{0, 1}, {2, 3, 4}};
  ParamStore params2;
  params2.values["head.path_logits"] = Matrix::Zero(1, 2);
  const EdgeConfidence separate =
      paths_to_edge_confidence(extract_top_paths(params2, disjoint, graph, 2), graph);
  CHECK(separate.size() == 3);
  for (const auto& [edge, confidence] : separate) CHECK(confidence == 0.5);
}

TEST_CASE("cell importance formula") {
  PopulationProfile profile;
  profile.count_diseased = 10;
  profile.count_healthy = 6;
  profile.mean_expr_diseased = Vector(2);
  profile.mean_expr_diseased << 1.0, 2.0;
  profile.mean_expr_healthy = Vector(2);
  profile.mean_expr_healthy << 0.5, 1.5;
  CHECK(cell_importance(profile, 0.5) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(cell_importance(profile, 0.0) == doctest::Approx(1.0).epsilon(1e-15));

  // Swapping the disease/healthy roles leaves the score unchanged.
  PopulationProfile swapped = profile;
  std::swap(swapped.count_diseased, swapped.count_healthy);
  swapped.mean_expr_diseased.swap(swapped.mean_expr_healthy);
  CHECK(cell_importance(swapped, 0.5) == cell_importance(profile, 0.5));

  PopulationProfile identical;
  identical.count_diseased = 4;
  identical.count_healthy = 4;
  identical.mean_expr_diseased = Vector::Constant(3, 1.1);
  identical.mean_expr_healthy = Vector::Constant(3, 1.1);
  CHECK(cell_importance(identical, 0.5) == 0.0);
}

TEST_CASE("population embeddings") {
  SyntheticData data = synthesize_dataset(8, 3, 12, 0, 2.0, 5);
  TrainConfig config = tiny_config();
  const EmbeddingStore store = mock_store(data.graph, data.paths, config.d_llm);
  const ModelInputs inputs = prepare_inputs(config, data.graph, data.paths, store);
  ParamStore params = init_params(config, inputs.dims, 9);
  randomize_params(params, 10, 0.3);

  // Single-cell population: embedding is that cell's G.
  ExpressionDataset single;
  single.n_genes = data.dataset.n_genes;
  single.cells.push_back(data.dataset.cells[0]);
  single.cells[0].population = "solo";
  const Vector solo = population_embedding(params, config, inputs, single, "solo");
  Tape tape;
  const StagedModel staged = stage_model(tape, params, config, inputs);
  const CellForward fwd = forward_cell(tape, staged, config, inputs, single.cells[0].expression);
  CHECK((solo - tape.value(fwd.graph_embedding).row(0).transpose()).cwiseAbs().maxCoeff() <
        1e-15);

  // Duplicating a cell does not move the mean.
  ExpressionDataset doubled = single;
  doubled.cells.push_back(single.cells[0]);
  const Vector dup = population_embedding(params, config, inputs, doubled, "solo");
  CHECK((dup - solo).cwiseAbs().maxCoeff() < 1e-15);

  // Crafted distinct populations produce distinct vectors.
  ExpressionDataset pair = single;
  pair.cells.push_back(data.dataset.cells[1]);
  pair.cells[1].population = "other";
  pair.cells[1].expression = pair.cells[1].expression.array() + 5.0;
  const Vector other = population_embedding(params, config, inputs, pair, "other");
  CHECK((other - solo).cwiseAbs().maxCoeff() > 1e-9);

  CHECK_THROWS_AS(population_embedding(params, config, inputs, single, "ghost"), DataError);
}

TEST_CASE("cosine distance") {
  Vector a(3), b(3);
  a << 1, 2, 3;
  CHECK(cosine_distance(a, a) == doctest::Approx(0.0).epsilon(1e-15));
  b << -2, 1, 0;  // orthogonal to (1,2,3)? dot = -2+2+0 = 0
  CHECK(cosine_distance(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_distance(a, Vector(-a)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_distance(a, Vector::Zero(3)), NumericError);
}

TEST_CASE("MST triangle and two-node fixtures") {
  Matrix triangle(3, 3);
  triangle << 0.0, 0.1, 0.9, 0.1, 0.0, 0.2, 0.9, 0.2, 0.0;
  const auto tree = build_mst(triangle);
  REQUIRE(tree.size() == 2);
  double total = 0.0;
  for (const MstEdge& e : tree) total += e.distance;
  CHECK(total == doctest::Approx(0.3).epsilon(1e-15));

  Matrix pair(2, 2);
  pair << 0.0, 0.7, 0.7, 0.0;
  const auto single = build_mst(pair);
  REQUIRE(single.size() == 1);
  CHECK(single[0].i == 0);
  CHECK(single[0].j == 1);

  CHECK_THROWS_AS(build_mst(Matrix::Zero(1, 1)), DataError);
}

TEST_CASE("MST equals exhaustive enumeration and beats random trees") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.uniform_int(3, 6);
    Matrix distances = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double d = rng.uniform();
        distances(i, j) = d;
        distances(j, i) = d;
      }
    const auto tree = build_mst(distances);
    REQUIRE(static_cast<int>(tree.size()) == n - 1);

    // Structure: acyclic and connected via union-find.
    std::vector<int> parent(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
    std::function<int(int)> find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
      return x;
    };
    for (const MstEdge& e : tree) {
      CHECK(find(e.i) != find(e.j));
      parent[static_cast<std::size_t>(find(e.i))] = find(e.j);
    }
    for (int i = 1; i < n; ++i) CHECK(find(0) == find(i));

    double total = 0.0;
    for (const MstEdge& e : tree) total += e.distance;
    CHECK(total == doctest::Approx(exhaustive_mst_weight(distances)).epsilon(1e-12));

    // Randomly sampled spanning trees are never lighter.
    for (int sample = 0; sample < 20; ++sample) {
      std::vector<std::pair<int, int>> edges;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      rng.shuffle(edges);
      std::vector<int> p2(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) p2[static_cast<std::size_t>(i)] = i;
      std::function<int(int)> find2 = [&](int x) {
        while (p2[static_cast<std::size_t>(x)] != x) x = p2[static_cast<std::size_t>(x)];
        return x;
      };
      double sampled = 0.0;
      int added = 0;
      for (const auto& [i, j] : edges) {
        if (find2(i) == find2(j)) continue;
        p2[static_cast<std::size_t>(find2(i))] = find2(j);
        sampled += distances(i, j);
        ++added;
      }
      REQUIRE(added == n - 1);
      CHECK(sampled >= total - 1e-12);
    }
  }
}

TEST_CASE("time pruning fixtures") {
  // Chain A(1) - B(2) - C(3), target C: both edges kept, oriented toward C.
  std::vector<MstEdge> chain = {{0, 1, 0.1}, {1, 2, 0.1}};
  std::vector<std::optional<double>> times = {1.0, 2.0, 3.0};
  const auto kept = prune_by_time(chain, times, 2, 3);
  REQUIRE(kept.size() == 2);
  std::set<std::pair<int, int>> oriented;
  for (const OrientedEdge& e : kept) oriented.emplace(e.src, e.dst);
  CHECK(oriented.count({0, 1}));
  CHECK(oriented.count({1, 2}));

  // All times equal: strict inequality empties the set.
  std::vector<std::optional<double>> flat = {2.0, 2.0, 2.0};
  CHECK(prune_by_time(chain, flat, 2, 3).empty());

  // One reversed time: only the conforming edge survives.
  std::vector<std::optional<double>> reversed = {1.0, 5.0, 3.0};
  const auto partial = prune_by_time(chain, reversed, 2, 3);
  REQUIRE(partial.size() == 1);
  CHECK(partial[0].src == 0);
  CHECK(partial[0].dst == 1);

  std::vector<std::optional<double>> missing = {1.0, std::nullopt, 3.0};
  CHECK_THROWS_AS(prune_by_time(chain, missing, 2, 3), DataError);
}

TEST_CASE("pruning keeps a subset of tree edges with strict time increase") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(2, 8);
    Matrix distances = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double d = 0.01 + rng.uniform();
        distances(i, j) = d;
        distances(j, i) = d;
      }
    const auto tree = build_mst(distances);
    std::vector<std::optional<double>> times;
    for (int i = 0; i < n; ++i)
      times.push_back(static_cast<double>(rng.uniform_int(0, 3)));
    const int target = rng.uniform_int(0, n - 1);
    const auto kept = prune_by_time(tree, times, target, n);

    std::set<std::pair<int, int>> tree_pairs;
    for (const MstEdge& e : tree) {
      tree_pairs.emplace(e.i, e.j);
      tree_pairs.emplace(e.j, e.i);
    }
    for (const OrientedEdge& e : kept) {
      CHECK(tree_pairs.count({e.src, e.dst}));
      CHECK(*times[static_cast<std::size_t>(e.src)] < *times[static_cast<std::size_t>(e.dst)]);
    }
  }
}

TEST_CASE("build_trajectory wires profiles into a pruned tree") {
  SyntheticData data = synthesize_dataset(8, 3, 24, 0, 2.0, 31);
  TrainConfig config = tiny_config();
  const EmbeddingStore store = mock_store(data.graph, data.paths, config.d_llm);
  const ModelInputs inputs = prepare_inputs(config, data.graph, data.paths, store);
  ParamStore params = init_params(config, inputs.dims, 3);
  randomize_params(params, 4, 0.3);

  const auto profiles = build_population_profiles(params, config, inputs, data.dataset);
  REQUIRE(profiles.size() == 4);  // pop0..pop3 from the synthesizer
  const TrajectoryGraph trajectory = build_trajectory(profiles, "pop3");
  CHECK(trajectory.mst_edges.size() == 3);
  CHECK(trajectory.pruned_edges.size() <= trajectory.mst_edges.size());
  CHECK(trajectory.populations[static_cast<std::size_t>(trajectory.target)] == "pop3");
  for (const OrientedEdge& e : trajectory.pruned_edges) {
    const auto& ps = profiles[static_cast<std::size_t>(e.src)];
    const auto& pd = profiles[static_cast<std::size_t>(e.dst)];
    CHECK(*ps.time < *pd.time);
  }
  CHECK_THROWS_AS(build_trajectory(profiles, "ghost"), DataError);
}
