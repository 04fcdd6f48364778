#include "tng/graph_encoder.hpp"

#include <cmath>

#include "tng/error.hpp"

namespace tng {

Var path_importance(Var path_logits) {
  Tape& tape = *path_logits.tape;
  if (tape.value(path_logits).rows() != 1)
    throw DataError("path_importance: logits must be a row vector");
  return sigmoid(path_logits);
}

Var layer_graph_embedding(Var importance, Var path_embedding) {
  return importance * path_embedding;
}

Var jumping_knowledge(const std::vector<Var>& layer_embeddings) {
  if (layer_embeddings.empty()) throw DataError("jumping_knowledge: no layers");
  Var combined = layer_embeddings[0];
  for (std::size_t l = 1; l < layer_embeddings.size(); ++l)
    combined = cwise_max(combined, layer_embeddings[l]);
  return combined;
}

Var classify_logits(Var graph_embedding, Var projection) {
  return graph_embedding * projection;
}

Vector path_importance_values(const Matrix& path_logits) {
  Vector importance(path_logits.cols());
  for (Index j = 0; j < path_logits.cols(); ++j) {
    const double m = path_logits(0, j);
    importance[j] = m >= 0.0 ? 1.0 / (1.0 + std::exp(-m)) : std::exp(m) / (1.0 + std::exp(m));
  }
  return importance;
}

}  // namespace tng
