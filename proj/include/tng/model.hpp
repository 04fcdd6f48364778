#pragma once

#include <string>
#include <vector>

#include "tng/config.hpp"
#include "tng/embedding.hpp"
#include "tng/gene_encoder.hpp"
#include "tng/graph.hpp"
#include "tng/graph_encoder.hpp"
#include "tng/path_encoder.hpp"
#include "tng/tape.hpp"

namespace tng {

struct ModelDims {
  int n = 0;               // genes
  int p = 0;               // paths
  int k = 0;               // flattened path nodes
  int edge_type_count = 1;
  int max_path_len = 2;
};

ModelDims derive_dims(const GeneGraph& graph, const PathList& paths, const ScatterIndex& index);

struct ParamShape {
  std::string name;
  Index rows = 0;
  Index cols = 0;
};

// Every trainable tensor, in a fixed declaration order.
std::vector<ParamShape> param_shapes(const TrainConfig& config, const ModelDims& dims);

// Training init: weight matrices scaled by 1/sqrt(fan-in), encoding tables
// small, biases, spatial scales, edge scalars and path logits at zero (no
// path favored at start).
ParamStore init_params(const TrainConfig& config, const ModelDims& dims, std::uint64_t seed);

// Fills every entry with scale * N(0,1); gradient checks use this so no
// parameter sits at an identically-zero saddle.
void randomize_params(ParamStore& params, std::uint64_t seed, double scale);

// Everything the forward pass needs besides per-cell expression. Shared
// read-only across cells.
struct ModelInputs {
  ScatterIndex index;
  Matrix gene_sentence;  // n x d_llm
  Matrix path_sentence;  // p x d_llm
  std::vector<int> in_degree_index, out_degree_index;  // clamped to d_max
  std::vector<int> attn_codes;  // n*n: edge type, SELF diagonal, NO_EDGE rest
  ModelDims dims;
};

// Resolves sentence vectors from the store (deterministic mock fallback with
// a warning for anything missing), validates paths, builds the scatter index
// and attention codes.
ModelInputs prepare_inputs(const TrainConfig& config, const GeneGraph& graph,
                           const PathList& paths, const EmbeddingStore& store);

// Per-tape staging of parameters and the cell-independent subgraphs: the
// attention bias matrices and the path importance row are built once and
// shared by every cell on the tape.
struct StagedModel {
  GeneEncoderVars gene;
  std::vector<PathEncoderLayerVars> path_layers;
  GraphEncoderVars head;
  std::vector<Var> attn_bias;
  Var importance;
  Var gene_sentence;
  Var path_sentence;
};

StagedModel stage_model(Tape& tape, const ParamStore& params, const TrainConfig& config,
                        const ModelInputs& inputs);

struct CellForward {
  Var logits;           // 1 x 2
  Var probs;            // 1 x 2
  Var graph_embedding;  // 1 x h_emb
  std::vector<Var> gene_layers;   // H^l per layer
  std::vector<Var> path_layers;   // P^l per layer
  std::vector<Var> layer_graph;   // g^l per layer
};

CellForward forward_cell(Tape& tape, const StagedModel& staged, const TrainConfig& config,
                         const ModelInputs& inputs, const Vector& expression);

}  // namespace tng
