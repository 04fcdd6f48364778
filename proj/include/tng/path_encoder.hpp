#pragma once

#include <vector>

#include "tng/graph.hpp"
#include "tng/tape.hpp"

namespace tng {

// One path-encoder layer; every gene-encoder layer feeds one of these.
struct PathEncoderLayerVars {
  Var wu, bu;        // h_emb -> u
  Var pos;           // max_path_len x u positional table
  Var pair;          // (edge types + TERMINAL) x u pair-edge table
  Var score_w1, score_b1;  // u -> r
  Var score_w2, score_b2;  // r -> r
  std::vector<Var> cross_wq;  // per head, h_emb x d_k
  std::vector<Var> cross_wk;  // per head, d_llm x d_k
  std::vector<Var> cross_wv;  // per head, d_llm x d_k
  Var cross_wo;               // (heads * d_k) x h_emb
};

// U row j = H[flat_nodes[j]] W_u + b_u.
Var path_specific_embedding(Var gene_embedding, const ScatterIndex& index,
                            const PathEncoderLayerVars& vars);

// Adds positional and pair-edge-type encodings (TERMINAL at each path's last
// slot). Positions beyond the table are a hard error, never a truncation.
Var apply_path_encodings(Var u, const ScatterIndex& index, const PathEncoderLayerVars& vars);

// S = tanh(U W_s1 + b_s1) W_s2 + b_s2 normalized per path: each of the r
// score columns sums to 1 within its segment.
Var node_scores(Var u_bar, const ScatterIndex& index, const PathEncoderLayerVars& vars,
                int num_paths);

// For each score set j: T_j = ScatterSum(scores_j * U_bar); columns of all r
// sets concatenate to p x (r*u).
Var aggregate_path_embedding(Var scores, Var u_bar, const ScatterIndex& index, int num_paths,
                             int r);

// Multi-head attention with query = raw path embedding and key/value = path
// sentence embeddings, plus a residual back onto the query.
Var cross_attend(Var p_raw, Var path_sentence, const PathEncoderLayerVars& vars, int d_k);

// Whole layer: gene embeddings -> expression-aware, text-fused path
// embeddings (p x h_emb).
Var path_layer_forward(Var gene_embedding, Var path_sentence, const ScatterIndex& index,
                       const PathEncoderLayerVars& vars, int num_paths, int r, int d_k);

}  // namespace tng
