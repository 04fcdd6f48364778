#pragma once

#include <cstdint>

namespace tng {

// Model and optimization hyperparameters. Attention width splits as
// heads * d_k = h_emb, and the path scorer splits as r * u = h_emb.
struct TrainConfig {
  int layers = 2;
  int h_emb = 16;
  int heads = 2;
  int d_k = 8;
  int r = 2;
  int u = 8;
  int d_llm = 768;
  int d_expand = 32;
  int d_max = 64;  // degree clamp for the centrality tables
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 1;
  double split_train = 0.7;
  double split_val = 0.1;
  double split_test = 0.2;

  void validate() const;
};

}  // namespace tng
