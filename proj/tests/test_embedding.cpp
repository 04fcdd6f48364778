#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "tng/embedding.hpp"
#include "tng/error.hpp"
#include "tng/util.hpp"

// After Eigen: httplib drags in resolver macros that break Eigen's headers.
#include <httplib.h>

using namespace tng;

namespace {

GeneGraph abc_graph() {
  std::vector<Gene> genes = {{"gA", "A", ""}, {"gB", "B", ""}, {"gC", "C", ""}};
  std::vector<GraphEdge> edges = {{0, 1, 0}, {1, 2, 0}};
  return GeneGraph(std::move(genes), std::move(edges));
}

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name)
      : path(std::filesystem::temp_directory_path() / ("tng_embed_" + name)) {
    std::filesystem::remove(path);
  }
  ~TempFile() { std::filesystem::remove(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("describe_gene") {
  CHECK(describe_gene({"ENSG_1", "KRAS", "KRAS drives MAPK signaling."}) ==
        "KRAS drives MAPK signaling.");
  CHECK(describe_gene({"ENSG_X", "KRAS", ""}) == "Gene KRAS (ENSG_X).");
  CHECK(describe_gene({"ENSG_X", "", ""}) == "Gene ENSG_X (ENSG_X).");
}

TEST_CASE("describe_path renders the canonical template") {
  std::vector<Gene> genes = {{"g1", "ABCA1", ""}, {"g2", "DPPA2", ""}};
  GeneGraph pair_graph(std::move(genes), {{0, 1, 0}});
  CHECK(describe_path({0, 1}, pair_graph) ==
        "In this pathway: receptor gene ABCA1 connect to target gene DPPA2.");

  const GeneGraph graph = abc_graph();
  CHECK(describe_path({0, 1, 2}, graph) ==
        "In this pathway: receptor gene A connect to signaling gene B, "
        "signaling gene B connect to target gene C.");
  CHECK(describe_path({0, 1, 2}, graph) == describe_path({0, 1, 2}, graph));
  CHECK_THROWS_AS(describe_path({0}, graph), DataError);
}

TEST_CASE("describe_path emits one clause per consecutive pair") {
  std::vector<Gene> genes;
  std::vector<GraphEdge> edges;
  for (int i = 0; i < 8; ++i) {
    genes.push_back({"g" + std::to_string(i), "S" + std::to_string(i), ""});
    if (i) edges.push_back({i - 1, i, 0});
  }
  const GeneGraph graph(std::move(genes), std::move(edges));
  for (int len = 2; len <= 8; ++len) {
    std::vector<int> path;
    for (int i = 0; i < len; ++i) path.push_back(i);
    const std::string text = describe_path(path, graph);
    std::size_t clauses = 1;
    for (std::size_t pos = 0; (pos = text.find(", ", pos)) != std::string::npos; ++pos)
      ++clauses;
    CHECK(clauses == static_cast<std::size_t>(len - 1));
  }
}

TEST_CASE("mock_embed determinism, norm, and collisions") {
  const Vector a = mock_embed("hello", 32, 7);
  const Vector b = mock_embed("hello", 32, 7);
  CHECK(a == b);
  CHECK(std::abs(a.norm() - 1.0) <= 1e-12);
  CHECK(mock_embed("hello", 32, 8) != a);

  std::set<std::vector<double>> seen;
  for (int i = 0; i < 1000; ++i) {
    const Vector v = mock_embed("text_" + std::to_string(i), 16, 1);
    CHECK(seen.insert(std::vector<double>(v.data(), v.data() + v.size())).second);
  }
}

TEST_CASE("embedding store round trip is bit exact") {
  EmbeddingStore store;
  store.d_llm = 5;
  store.set_gene("gA", mock_embed("a", 5, 1));
  store.set_gene("gB", mock_embed("b", 5, 1));
  store.set_path("p0", mock_embed("p", 5, 1));
  TempFile file("store.tnge");
  save_embedding_store(store, file.str());
  const EmbeddingStore loaded = load_embedding_store(file.str());
  CHECK(loaded.d_llm == 5);
  CHECK(loaded.gene_vectors.size() == 2);
  CHECK(loaded.path_vectors.size() == 1);
  CHECK(loaded.gene_vectors.at("gA") == store.gene_vectors.at("gA"));
  CHECK(loaded.path_vectors.at("p0") == store.path_vectors.at("p0"));

  TempFile file2("store2.tnge");
  save_embedding_store(loaded, file2.str());
  CHECK(read_file(file.str()) == read_file(file2.str()));
}

TEST_CASE("store rejects mixed widths and corrupt files") {
  EmbeddingStore store;
  store.d_llm = 4;
  CHECK_THROWS_AS(store.set_gene("gA", mock_embed("a", 5, 1)), DataError);

  TempFile file("corrupt.tnge");
  write_file_atomic(file.str(), "NOPE not a store");
  CHECK_THROWS_AS(load_embedding_store(file.str()), DataError);
}

TEST_CASE("fetch_embeddings empty input issues zero requests") {
  EmbedClientConfig config;
  config.endpoint = "http://127.0.0.1:1";  // would fail if contacted
  CHECK(fetch_embeddings(config, {}).empty());
}

TEST_CASE("fetch_embeddings batches, retries and validates widths") {
  std::atomic<int> requests{0};
  std::atomic<bool> fail_first{true};
  httplib::Server server;
  server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    ++requests;
    if (fail_first.exchange(false)) {
      res.status = 500;
      return;
    }
    std::string body;
    std::size_t count = std::count(req.body.begin(), req.body.end(), '\n') + 1;
    for (std::size_t i = 0; i < count; ++i) body += "0.5,1.5,-2.0\n";
    res.set_content(body, "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  EmbedClientConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/embed";
  config.batch_size = 2;
  config.retries = 2;
  const auto vectors =
      fetch_embeddings(config, {"t1", "t2", "t3", "t4", "t5"});
  CHECK(vectors.size() == 5);
  for (const Vector& v : vectors) {
    CHECK(v.size() == 3);
    CHECK(v[0] == 0.5);
    CHECK(v[2] == -2.0);
  }
  // 3 batches (ceil(5/2)) plus the one retried failure.
  CHECK(requests.load() == 4);

  server.stop();
  runner.join();
}

TEST_CASE("fetch_embeddings flags width mismatches across lines") {
  httplib::Server server;
  server.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("1.0,2.0\n1.0,2.0,3.0\n", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  EmbedClientConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/embed";
  config.batch_size = 8;
  config.retries = 0;
  CHECK_THROWS_WITH_AS(fetch_embeddings(config, {"a", "b"}),
                       doctest::Contains("width mismatch"), DataError);
  server.stop();
  runner.join();
}

TEST_CASE("fetch_embeddings names the failed batch after retries") {
  EmbedClientConfig config;
  config.endpoint = "http://127.0.0.1:9";  // discard port, nothing listens
  config.batch_size = 2;
  config.retries = 1;
  config.timeout_seconds = 0.5;
  CHECK_THROWS_WITH_AS(fetch_embeddings(config, {"a", "b", "c"}),
                       doctest::Contains("batch 0..1"), DataError);
}
