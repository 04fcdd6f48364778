#include "tng/path_encoder.hpp"

#include <cmath>

#include "tng/error.hpp"

namespace tng {

Var path_specific_embedding(Var gene_embedding, const ScatterIndex& index,
                            const PathEncoderLayerVars& vars) {
  return add_row_broadcast(gather_rows(gene_embedding, index.flat_nodes) * vars.wu, vars.bu);
}

Var apply_path_encodings(Var u, const ScatterIndex& index, const PathEncoderLayerVars& vars) {
  Tape& tape = *u.tape;
  const Index table_len = tape.value(vars.pos).rows();
  for (int pos : index.positions)
    if (pos >= table_len)
      throw DataError("apply_path_encodings: path position " + std::to_string(pos) +
                      " exceeds positional table of length " + std::to_string(table_len));
  return u + gather_rows(vars.pos, index.positions) +
         gather_rows(vars.pair, index.pair_edge_types);
}

Var node_scores(Var u_bar, const ScatterIndex& index, const PathEncoderLayerVars& vars,
                int num_paths) {
  Var hidden = tanh_act(add_row_broadcast(u_bar * vars.score_w1, vars.score_b1));
  Var s = add_row_broadcast(hidden * vars.score_w2, vars.score_b2);
  return scatter_softmax(s, index.segment_ids, num_paths);
}

Var aggregate_path_embedding(Var scores, Var u_bar, const ScatterIndex& index, int num_paths,
                             int r) {
  std::vector<Var> sets;
  sets.reserve(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) {
    Var weighted = cwise_mul_col(u_bar, slice_col(scores, j));
    sets.push_back(scatter_sum(weighted, index.segment_ids, num_paths));
  }
  return concat_cols(sets);
}

Var cross_attend(Var p_raw, Var path_sentence, const PathEncoderLayerVars& vars, int d_k) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
  std::vector<Var> heads;
  heads.reserve(vars.cross_wq.size());
  for (std::size_t i = 0; i < vars.cross_wq.size(); ++i) {
    Var q = p_raw * vars.cross_wq[i];
    Var k = path_sentence * vars.cross_wk[i];
    Var v = path_sentence * vars.cross_wv[i];
    heads.push_back(softmax_rows(scale(matmul_nt(q, k), inv_sqrt_dk)) * v);
  }
  return p_raw + concat_cols(heads) * vars.cross_wo;
}

Var path_layer_forward(Var gene_embedding, Var path_sentence, const ScatterIndex& index,
                       const PathEncoderLayerVars& vars, int num_paths, int r, int d_k) {
  Var u = path_specific_embedding(gene_embedding, index, vars);
  Var u_bar = apply_path_encodings(u, index, vars);
  Var scores = node_scores(u_bar, index, vars, num_paths);
  Var p_raw = aggregate_path_embedding(scores, u_bar, index, num_paths, r);
  return cross_attend(p_raw, path_sentence, vars, d_k);
}

}  // namespace tng
