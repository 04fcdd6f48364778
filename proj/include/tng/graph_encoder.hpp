#pragma once

#include <vector>

#include "tng/tape.hpp"
#include "tng/types.hpp"

namespace tng {

// Dataset-global head: one trainable logit per path (shared by every sample
// and layer) plus the binary classification projection.
struct GraphEncoderVars {
  Var path_logits;  // 1 x p (the trainable score M)
  Var projection;   // h_emb x 2
};

// I = Sigmoid(M), strictly inside (0, 1) for finite logits.
Var path_importance(Var path_logits);

// g_l = I P_l: importance-weighted sum of path embeddings.
Var layer_graph_embedding(Var importance, Var path_embedding);

// Element-wise max across the per-layer graph embeddings.
Var jumping_knowledge(const std::vector<Var>& layer_embeddings);

Var classify_logits(Var graph_embedding, Var projection);

// Plain (tape-free) importance for analysis of trained checkpoints.
Vector path_importance_values(const Matrix& path_logits);

}  // namespace tng
