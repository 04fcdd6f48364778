#pragma once

#include <vector>

#include "tng/tape.hpp"

namespace tng {

// Trainable pieces of the gene encoder, staged on a tape. The attention bias
// tables (node-ID embedding, per-head spatial scale, per-head edge-type
// scalars) are shared across layers.
struct GeneEncoderVars {
  Var expr_w, expr_b;  // scalar expression -> d_expand
  Var fuse_w, fuse_b;  // (d_llm + d_expand) -> h_emb
  Var z_in, z_out;     // (d_max + 1) x h_emb centrality tables
  Var node_id;         // n x h_emb
  Var beta;            // heads x 1 spatial scale
  Var edge_scalar;     // heads x (edge types + NO_EDGE + SELF)

  struct Layer {
    std::vector<Var> wq, wk, wv;  // per head, h_emb x d_k
    Var wo;                       // (heads * d_k) x h_emb
    Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };
  std::vector<Layer> layers;
};

// Row v = MLP(Concat(se_v, MLP(ge_v))). `expression` is n x 1, the sentence
// matrix n x d_llm.
Var expand_input(const GeneEncoderVars& vars, Var expression, Var gene_sentence);

// H0 = X + Z_in[min(in_deg, d_max)] + Z_out[min(out_deg, d_max)]; the index
// vectors come pre-clamped.
Var centrality_encode(const GeneEncoderVars& vars, Var x, const std::vector<int>& in_index,
                      const std::vector<int>& out_index);

// Per head: beta_i * (NodeId NodeId^T) / sqrt(h_emb) plus the per-type edge
// scalar looked up through `codes` (type, SELF on the diagonal, NO_EDGE
// elsewhere; n*n row-major).
std::vector<Var> build_attention_bias(const GeneEncoderVars& vars,
                                      const std::vector<int>& codes, int n, int h_emb);

// Multi-head self-attention with biased logits, output projection, then the
// point-wise FFN; residuals around both.
Var gene_layer_forward(Var h_prev, const std::vector<Var>& bias,
                       const GeneEncoderVars::Layer& layer, int d_k);

}  // namespace tng
