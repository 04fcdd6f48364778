#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tng/graph.hpp"
#include "tng/types.hpp"

namespace tng {

// Gene and path sentence vectors, all exactly d_llm wide. Immutable once
// loaded; pooling over tokens is the embedding service's job, this side only
// consumes pooled vectors.
struct EmbeddingStore {
  int d_llm = 768;
  std::map<std::string, Vector> gene_vectors;
  std::map<std::string, Vector> path_vectors;

  void set_gene(const std::string& gene_id, const Vector& v);
  void set_path(const std::string& path_id, const Vector& v);
};

// The gene's curated description when present, otherwise the canonical
// fallback `Gene <symbol> (<gene_id>).`.
std::string describe_gene(const Gene& gene);

// Canonical pathway sentence: first node is the receptor gene, last the
// target gene, intermediates signaling genes; one clause per consecutive
// pair. The verb form and role-by-position rule are fixed; changing either
// silently invalidates every cached embedding.
std::string describe_path(const std::vector<int>& path, const GeneGraph& graph);

// Hash-seeded pseudorandom unit vector; a pure function of (text bytes, seed).
Vector mock_embed(std::string_view text, int d_llm, std::uint64_t seed);

void save_embedding_store(const EmbeddingStore& store, const std::string& file);
EmbeddingStore load_embedding_store(const std::string& file);

struct EmbedClientConfig {
  std::string endpoint;
  double timeout_seconds = 30.0;
  int batch_size = 16;
  int retries = 2;
};

// POSTs newline-delimited texts in batches of batch_size; each response line
// is one comma-separated vector. Retries each batch with exponential backoff;
// results come back in input order.
std::vector<Vector> fetch_embeddings(const EmbedClientConfig& config,
                                     const std::vector<std::string>& texts);

}  // namespace tng
