#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tng/types.hpp"

namespace tng {

class Tape;

// Handle to a node on a tape. Values are matrices; vectors travel as n x 1 or
// 1 x n, scalars as 1 x 1.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

// Reverse-mode tape. Node creation order is a topological order of the
// computation, so the backward pass is a single reverse sweep that fires each
// node's rule exactly once. One tape is confined to one thread.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, int)>;

  Var leaf(Matrix value);
  Var param(const std::string& name, const Matrix& value);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;

  void backward(Var loss);

  // Gradient per registered parameter; parameters the loss never touched
  // report zeros.
  std::map<std::string, Matrix> param_grads() const;

  int node_count() const { return static_cast<int>(nodes_.size()); }

  // Low-level constructor used by the op functions below. Rejects non-finite
  // values so numeric failures surface at the op that produced them.
  Var emit(const char* op, Matrix value, std::vector<int> parents, BackFn back);
  const Matrix& node_value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Matrix& node_grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> parents;
    BackFn back;
  };
  std::vector<Node> nodes_;
  std::map<std::string, int> params_;
  bool ran_backward_ = false;
};

// Same-shape arithmetic.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
// Matrix product, Eigen semantics.
Var operator*(Var a, Var b);
// a * b^T without materializing the transpose.
Var matmul_nt(Var a, Var b);

Var cwise_mul(Var a, Var b);
Var scale(Var a, double factor);
// Scale by a 1x1 tape value (trainable scalar).
Var scale_by(Var a, Var scalar);
// Add a 1 x d row vector to every row of x.
Var add_row_broadcast(Var x, Var row);

Var relu(Var x);
Var tanh_act(Var x);
Var sigmoid(Var x);

Var softmax_rows(Var x);
Var scatter_softmax(Var x, std::vector<int> segment_ids, int num_segments);
Var scatter_sum(Var x, std::vector<int> segment_ids, int num_segments);

// out row j = x row rows[j]; backward scatter-adds into the gathered rows.
Var gather_rows(Var x, std::vector<int> rows);
Var concat_cols(const std::vector<Var>& parts);
Var slice_col(Var x, Index col);
// x (k x d) scaled row-wise by a k x 1 column.
Var cwise_mul_col(Var x, Var column);
Var cwise_max(Var a, Var b);
// out(i, j) = scalars(0, codes[i * cols + j]); the lookup that turns per-type
// scalars into an attention-bias matrix.
Var code_lookup(Var scalars, std::vector<int> codes, Index rows, Index cols);

Var sum_all(Var x);
Var mean_all(Var x);
// Mean cross-entropy of row-wise softmax(logits) against integer labels.
Var cross_entropy_logits(Var logits, std::vector<int> labels);

// Named trainable tensors, ordered by name so every traversal is
// deterministic.
struct ParamStore {
  std::map<std::string, Matrix> values;

  bool has(const std::string& name) const { return values.count(name) != 0; }
  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);
};

// Max over sampled coordinates of |analytic - central difference| /
// max(1, |central difference|). Probes only the parameters named in
// `analytic`; `f` must be a deterministic map from parameters to a scalar.
double finite_difference_check(const std::function<double(const ParamStore&)>& f,
                               const ParamStore& params,
                               const std::map<std::string, Matrix>& analytic,
                               double eps, int coords_per_param, std::uint64_t seed,
                               std::string* worst_coordinate = nullptr);

}  // namespace tng
