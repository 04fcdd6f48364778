#include "tng/model.hpp"

#include <algorithm>
#include <cmath>

#include "tng/error.hpp"
#include "tng/rng.hpp"
#include "tng/util.hpp"

namespace tng {

void TrainConfig::validate() const {
  if (layers < 1) throw UsageError("config: layers must be >= 1");
  if (heads < 1 || d_k < 1 || h_emb < 1) throw UsageError("config: attention dims must be >= 1");
  if (heads * d_k != h_emb) throw UsageError("config: heads * d_k must equal h_emb");
  if (r < 1 || u < 1) throw UsageError("config: r and u must be >= 1");
  if (r * u != h_emb) throw UsageError("config: r * u must equal h_emb");
  if (d_llm < 1 || d_expand < 1) throw UsageError("config: embedding dims must be >= 1");
  if (d_max < 0) throw UsageError("config: d_max must be >= 0");
  if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
  if (epochs < 0) throw UsageError("config: epochs must be >= 0");
  if (split_train <= 0.0 || split_val < 0.0 || split_test < 0.0)
    throw UsageError("config: split ratios must be positive");
  if (std::abs(split_train + split_val + split_test - 1.0) > 1e-9)
    throw UsageError("config: split ratios must sum to 1");
}

ModelDims derive_dims(const GeneGraph& graph, const PathList& paths,
                      const ScatterIndex& index) {
  ModelDims dims;
  dims.n = graph.n();
  dims.p = paths.p();
  dims.k = index.k;
  dims.edge_type_count = graph.edge_type_count();
  dims.max_path_len = index.max_path_len;
  return dims;
}

std::vector<ParamShape> param_shapes(const TrainConfig& c, const ModelDims& d) {
  std::vector<ParamShape> shapes;
  auto add = [&](const std::string& name, Index rows, Index cols) {
    shapes.push_back({name, rows, cols});
  };
  add("expander.expr_w", 1, c.d_expand);
  add("expander.expr_b", 1, c.d_expand);
  add("expander.fuse_w", c.d_llm + c.d_expand, c.h_emb);
  add("expander.fuse_b", 1, c.h_emb);
  add("centrality.z_in", c.d_max + 1, c.h_emb);
  add("centrality.z_out", c.d_max + 1, c.h_emb);
  add("spatial.node_id", d.n, c.h_emb);
  add("spatial.beta", c.heads, 1);
  add("spatial.edge_scalar", c.heads, d.edge_type_count + 2);  // + NO_EDGE + SELF
  for (int l = 0; l < c.layers; ++l) {
    const std::string gene = "gene.l" + std::to_string(l) + ".";
    for (int i = 0; i < c.heads; ++i) {
      const std::string head = gene + "h" + std::to_string(i) + ".";
      add(head + "wq", c.h_emb, c.d_k);
      add(head + "wk", c.h_emb, c.d_k);
      add(head + "wv", c.h_emb, c.d_k);
    }
    add(gene + "wo", c.heads * c.d_k, c.h_emb);
    add(gene + "ffn_w1", c.h_emb, c.h_emb);
    add(gene + "ffn_b1", 1, c.h_emb);
    add(gene + "ffn_w2", c.h_emb, c.h_emb);
    add(gene + "ffn_b2", 1, c.h_emb);
    const std::string path = "path.l" + std::to_string(l) + ".";
    add(path + "wu", c.h_emb, c.u);
    add(path + "bu", 1, c.u);
    add(path + "pos", d.max_path_len, c.u);
    add(path + "pair", d.edge_type_count + 1, c.u);  // + TERMINAL
    add(path + "score_w1", c.u, c.r);
    add(path + "score_b1", 1, c.r);
    add(path + "score_w2", c.r, c.r);
    add(path + "score_b2", 1, c.r);
    for (int i = 0; i < c.heads; ++i) {
      const std::string head = path + "cross.h" + std::to_string(i) + ".";
      add(head + "wq", c.h_emb, c.d_k);
      add(head + "wk", c.d_llm, c.d_k);
      add(head + "wv", c.d_llm, c.d_k);
    }
    add(path + "cross.wo", c.heads * c.d_k, c.h_emb);
  }
  add("head.path_logits", 1, d.p);
  add("head.projection", c.h_emb, 2);
  return shapes;
}

namespace {

bool is_table(const std::string& name) {
  return name == "centrality.z_in" || name == "centrality.z_out" ||
         name == "spatial.node_id" || name.find(".pos") != std::string::npos ||
         name.find(".pair") != std::string::npos;
}

bool starts_at_zero(const std::string& name) {
  return name == "spatial.beta" || name == "spatial.edge_scalar" ||
         name == "head.path_logits" || name.find("_b") != std::string::npos ||
         name.find(".bu") != std::string::npos;
}

}  // namespace

ParamStore init_params(const TrainConfig& config, const ModelDims& dims, std::uint64_t seed) {
  Rng rng(seed ^ 0x7061726d73ULL);
  ParamStore params;
  for (const ParamShape& shape : param_shapes(config, dims)) {
    Matrix value = Matrix::Zero(shape.rows, shape.cols);
    if (starts_at_zero(shape.name)) {
      // stays zero
    } else if (is_table(shape.name)) {
      for (Index i = 0; i < value.rows(); ++i)
        for (Index j = 0; j < value.cols(); ++j) value(i, j) = 0.02 * rng.normal();
    } else {
      const double scale = 1.0 / std::sqrt(static_cast<double>(shape.rows));
      for (Index i = 0; i < value.rows(); ++i)
        for (Index j = 0; j < value.cols(); ++j) value(i, j) = scale * rng.normal();
    }
    params.values.emplace(shape.name, std::move(value));
  }
  return params;
}

void randomize_params(ParamStore& params, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& [name, value] : params.values)
    for (Index i = 0; i < value.rows(); ++i)
      for (Index j = 0; j < value.cols(); ++j) value(i, j) = scale * rng.normal();
}

ModelInputs prepare_inputs(const TrainConfig& config, const GeneGraph& graph,
                           const PathList& paths, const EmbeddingStore& store) {
  config.validate();
  if (store.d_llm != config.d_llm)
    throw DataError("embedding store width " + std::to_string(store.d_llm) +
                    " does not match configured d_llm " + std::to_string(config.d_llm));
  const auto violations = validate_paths(paths, graph);
  if (!violations.empty()) {
    const PathViolation& v = violations.front();
    throw DataError("invalid path list: path " + std::to_string(v.path) + " position " +
                    std::to_string(v.position) + ": " + v.what + " (" +
                    std::to_string(violations.size()) + " violation(s) total)");
  }

  ModelInputs inputs;
  inputs.index = build_scatter_index(paths, graph);
  inputs.dims = derive_dims(graph, paths, inputs.index);

  inputs.gene_sentence = Matrix(inputs.dims.n, config.d_llm);
  for (int v = 0; v < inputs.dims.n; ++v) {
    const Gene& gene = graph.genes()[static_cast<std::size_t>(v)];
    const auto it = store.gene_vectors.find(gene.id);
    if (it != store.gene_vectors.end()) {
      inputs.gene_sentence.row(v) = it->second.transpose();
    } else {
      warn("no stored embedding for gene '" + gene.id + "'; using deterministic mock");
      inputs.gene_sentence.row(v) =
          mock_embed(describe_gene(gene), config.d_llm, 0).transpose();
    }
  }
  inputs.path_sentence = Matrix(inputs.dims.p, config.d_llm);
  for (int m = 0; m < inputs.dims.p; ++m) {
    const std::string& path_id = paths.ids[static_cast<std::size_t>(m)];
    const auto it = store.path_vectors.find(path_id);
    if (it != store.path_vectors.end()) {
      inputs.path_sentence.row(m) = it->second.transpose();
    } else {
      warn("no stored embedding for path '" + path_id + "'; using deterministic mock");
      inputs.path_sentence.row(m) =
          mock_embed(describe_path(paths.paths[static_cast<std::size_t>(m)], graph),
                     config.d_llm, 0)
              .transpose();
    }
  }

  const auto [in_degree, out_degree] = compute_degrees(graph);
  inputs.in_degree_index.resize(static_cast<std::size_t>(inputs.dims.n));
  inputs.out_degree_index.resize(static_cast<std::size_t>(inputs.dims.n));
  for (int v = 0; v < inputs.dims.n; ++v) {
    inputs.in_degree_index[static_cast<std::size_t>(v)] =
        std::min(in_degree[static_cast<std::size_t>(v)], config.d_max);
    inputs.out_degree_index[static_cast<std::size_t>(v)] =
        std::min(out_degree[static_cast<std::size_t>(v)], config.d_max);
  }

  const int no_edge = inputs.dims.edge_type_count;
  const int self = inputs.dims.edge_type_count + 1;
  inputs.attn_codes.assign(static_cast<std::size_t>(inputs.dims.n) *
                               static_cast<std::size_t>(inputs.dims.n),
                           no_edge);
  for (int a = 0; a < inputs.dims.n; ++a)
    inputs.attn_codes[static_cast<std::size_t>(a * inputs.dims.n + a)] = self;
  for (const GraphEdge& e : graph.edges())
    if (e.src != e.dst)
      inputs.attn_codes[static_cast<std::size_t>(e.src * inputs.dims.n + e.dst)] = e.type;
  return inputs;
}

StagedModel stage_model(Tape& tape, const ParamStore& params, const TrainConfig& config,
                        const ModelInputs& inputs) {
  auto stage = [&](const std::string& name) { return tape.param(name, params.at(name)); };

  StagedModel staged;
  staged.gene.expr_w = stage("expander.expr_w");
  staged.gene.expr_b = stage("expander.expr_b");
  staged.gene.fuse_w = stage("expander.fuse_w");
  staged.gene.fuse_b = stage("expander.fuse_b");
  staged.gene.z_in = stage("centrality.z_in");
  staged.gene.z_out = stage("centrality.z_out");
  staged.gene.node_id = stage("spatial.node_id");
  staged.gene.beta = stage("spatial.beta");
  staged.gene.edge_scalar = stage("spatial.edge_scalar");
  for (int l = 0; l < config.layers; ++l) {
    const std::string gene = "gene.l" + std::to_string(l) + ".";
    GeneEncoderVars::Layer layer;
    for (int i = 0; i < config.heads; ++i) {
      const std::string head = gene + "h" + std::to_string(i) + ".";
      layer.wq.push_back(stage(head + "wq"));
      layer.wk.push_back(stage(head + "wk"));
      layer.wv.push_back(stage(head + "wv"));
    }
    layer.wo = stage(gene + "wo");
    layer.ffn_w1 = stage(gene + "ffn_w1");
    layer.ffn_b1 = stage(gene + "ffn_b1");
    layer.ffn_w2 = stage(gene + "ffn_w2");
    layer.ffn_b2 = stage(gene + "ffn_b2");
    staged.gene.layers.push_back(std::move(layer));

    const std::string path = "path.l" + std::to_string(l) + ".";
    PathEncoderLayerVars path_layer;
    path_layer.wu = stage(path + "wu");
    path_layer.bu = stage(path + "bu");
    path_layer.pos = stage(path + "pos");
    path_layer.pair = stage(path + "pair");
    path_layer.score_w1 = stage(path + "score_w1");
    path_layer.score_b1 = stage(path + "score_b1");
    path_layer.score_w2 = stage(path + "score_w2");
    path_layer.score_b2 = stage(path + "score_b2");
    for (int i = 0; i < config.heads; ++i) {
      const std::string head = path + "cross.h" + std::to_string(i) + ".";
      path_layer.cross_wq.push_back(stage(head + "wq"));
      path_layer.cross_wk.push_back(stage(head + "wk"));
      path_layer.cross_wv.push_back(stage(head + "wv"));
    }
    path_layer.cross_wo = stage(path + "cross.wo");
    staged.path_layers.push_back(std::move(path_layer));
  }
  staged.head.path_logits = stage("head.path_logits");
  staged.head.projection = stage("head.projection");

  staged.gene_sentence = tape.leaf(inputs.gene_sentence);
  staged.path_sentence = tape.leaf(inputs.path_sentence);
  staged.attn_bias =
      build_attention_bias(staged.gene, inputs.attn_codes, inputs.dims.n, config.h_emb);
  staged.importance = path_importance(staged.head.path_logits);
  return staged;
}

CellForward forward_cell(Tape& tape, const StagedModel& staged, const TrainConfig& config,
                         const ModelInputs& inputs, const Vector& expression) {
  if (expression.size() != inputs.dims.n)
    throw DataError("forward_cell: expression length " + std::to_string(expression.size()) +
                    " does not match " + std::to_string(inputs.dims.n) + " genes");
  if (!expression.allFinite()) throw NumericError("forward_cell: non-finite expression");

  CellForward out;
  Var expr = tape.leaf(Matrix(expression));
  Var x = expand_input(staged.gene, expr, staged.gene_sentence);
  Var h = centrality_encode(staged.gene, x, inputs.in_degree_index, inputs.out_degree_index);
  for (int l = 0; l < config.layers; ++l) {
    h = gene_layer_forward(h, staged.attn_bias, staged.gene.layers[static_cast<std::size_t>(l)],
                           config.d_k);
    out.gene_layers.push_back(h);
    Var p_l = path_layer_forward(h, staged.path_sentence, inputs.index,
                                 staged.path_layers[static_cast<std::size_t>(l)], inputs.dims.p,
                                 config.r, config.d_k);
    out.path_layers.push_back(p_l);
    out.layer_graph.push_back(layer_graph_embedding(staged.importance, p_l));
  }
  out.graph_embedding = jumping_knowledge(out.layer_graph);
  out.logits = classify_logits(out.graph_embedding, staged.head.projection);
  out.probs = softmax_rows(out.logits);
  return out;
}

}  // namespace tng
