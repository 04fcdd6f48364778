#include "tng/gene_encoder.hpp"

#include <cmath>

#include "tng/error.hpp"

namespace tng {

Var expand_input(const GeneEncoderVars& vars, Var expression, Var gene_sentence) {
  Tape& tape = *expression.tape;
  if (tape.value(expression).cols() != 1)
    throw DataError("expand_input: expression must be a column");
  Var expanded = tanh_act(add_row_broadcast(expression * vars.expr_w, vars.expr_b));
  Var fused = concat_cols({gene_sentence, expanded});
  return tanh_act(add_row_broadcast(fused * vars.fuse_w, vars.fuse_b));
}

Var centrality_encode(const GeneEncoderVars& vars, Var x, const std::vector<int>& in_index,
                      const std::vector<int>& out_index) {
  return x + gather_rows(vars.z_in, in_index) + gather_rows(vars.z_out, out_index);
}

std::vector<Var> build_attention_bias(const GeneEncoderVars& vars,
                                      const std::vector<int>& codes, int n, int h_emb) {
  Tape& tape = *vars.node_id.tape;
  const int heads = static_cast<int>(tape.value(vars.beta).rows());
  Var spatial = scale(matmul_nt(vars.node_id, vars.node_id), 1.0 / std::sqrt(double(h_emb)));
  std::vector<Var> bias;
  bias.reserve(static_cast<std::size_t>(heads));
  for (int i = 0; i < heads; ++i) {
    Var beta_i = gather_rows(vars.beta, {i});
    Var edge_row = gather_rows(vars.edge_scalar, {i});
    bias.push_back(scale_by(spatial, beta_i) + code_lookup(edge_row, codes, n, n));
  }
  return bias;
}

Var gene_layer_forward(Var h_prev, const std::vector<Var>& bias,
                       const GeneEncoderVars::Layer& layer, int d_k) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
  std::vector<Var> heads;
  heads.reserve(layer.wq.size());
  for (std::size_t i = 0; i < layer.wq.size(); ++i) {
    Var q = h_prev * layer.wq[i];
    Var k = h_prev * layer.wk[i];
    Var v = h_prev * layer.wv[i];
    Var logits = scale(matmul_nt(q, k), inv_sqrt_dk) + bias[i];
    heads.push_back(softmax_rows(logits) * v);
  }
  Var attended = h_prev + concat_cols(heads) * layer.wo;
  Var hidden = relu(add_row_broadcast(attended * layer.ffn_w1, layer.ffn_b1));
  Var ffn = add_row_broadcast(hidden * layer.ffn_w2, layer.ffn_b2);
  return attended + ffn;
}

}  // namespace tng
