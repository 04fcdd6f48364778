#include "tng/tape.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "tng/error.hpp"
#include "tng/kernels.hpp"
#include "tng/rng.hpp"

namespace tng {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape)
    throw DataError(std::string(op) + ": operands live on different tapes");
}

void require_shape(const Matrix& value, Index rows, Index cols, const char* op) {
  if (value.rows() != rows || value.cols() != cols)
    throw DataError(std::string(op) + ": expected " + std::to_string(rows) + "x" +
                    std::to_string(cols) + ", got " + std::to_string(value.rows()) + "x" +
                    std::to_string(value.cols()));
}

}  // namespace

Var Tape::emit(const char* op, Matrix value, std::vector<int> parents, BackFn back) {
  if (!value.allFinite())
    throw NumericError(std::string(op) + ": produced non-finite values");
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(parents), std::move(back)});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value) { return emit("leaf", std::move(value), {}, nullptr); }

Var Tape::param(const std::string& name, const Matrix& value) {
  if (params_.count(name)) throw DataError("duplicate parameter on tape: " + name);
  Var v = emit("param", value, {}, nullptr);
  params_[name] = v.id;
  return v;
}

const Matrix& Tape::value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

const Matrix& Tape::grad(Var v) const {
  if (!ran_backward_) throw DataError("grad requested before backward");
  return nodes_[static_cast<std::size_t>(v.id)].grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw DataError("backward: loss from another tape");
  const Matrix& loss_value = nodes_[static_cast<std::size_t>(loss.id)].value;
  if (loss_value.rows() != 1 || loss_value.cols() != 1)
    throw DataError("backward: loss must be 1x1");
  for (Node& node : nodes_) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  nodes_[static_cast<std::size_t>(loss.id)].grad(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.back) node.back(*this, id);
  }
  ran_backward_ = true;
}

std::map<std::string, Matrix> Tape::param_grads() const {
  if (!ran_backward_) throw DataError("param_grads requested before backward");
  std::map<std::string, Matrix> grads;
  for (const auto& [name, id] : params_) grads[name] = nodes_[static_cast<std::size_t>(id)].grad;
  return grads;
}

Var operator+(Var a, Var b) {
  require_same_tape(a, b, "add");
  Tape& t = *a.tape;
  const Matrix& av = t.node_value(a.id);
  const Matrix& bv = t.node_value(b.id);
  require_shape(bv, av.rows(), av.cols(), "add");
  return t.emit("add", av + bv, {a.id, b.id}, [pa = a.id, pb = b.id](Tape& t, int self) {
    t.node_grad(pa) += t.node_grad(self);
    t.node_grad(pb) += t.node_grad(self);
  });
}

Var operator-(Var a, Var b) {
  require_same_tape(a, b, "sub");
  Tape& t = *a.tape;
  const Matrix& av = t.node_value(a.id);
  const Matrix& bv = t.node_value(b.id);
  require_shape(bv, av.rows(), av.cols(), "sub");
  return t.emit("sub", av - bv, {a.id, b.id}, [pa = a.id, pb = b.id](Tape& t, int self) {
    t.node_grad(pa) += t.node_grad(self);
    t.node_grad(pb) -= t.node_grad(self);
  });
}

Var operator*(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tape& t = *a.tape;
  const Matrix& av = t.node_value(a.id);
  const Matrix& bv = t.node_value(b.id);
  if (av.cols() != bv.rows()) throw DataError("matmul: inner dimensions disagree");
  return t.emit("matmul", av * bv, {a.id, b.id}, [pa = a.id, pb = b.id](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    t.node_grad(pa) += g * t.node_value(pb).transpose();
    t.node_grad(pb) += t.node_value(pa).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b, "matmul_nt");
  Tape& t = *a.tape;
  const Matrix& av = t.node_value(a.id);
  const Matrix& bv = t.node_value(b.id);
  if (av.cols() != bv.cols()) throw DataError("matmul_nt: inner dimensions disagree");
  return t.emit("matmul_nt", av * bv.transpose(), {a.id, b.id},
                [pa = a.id, pb = b.id](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  t.node_grad(pa) += g * t.node_value(pb);
                  t.node_grad(pb) += g.transpose() * t.node_value(pa);
                });
}

Var cwise_mul(Var a, Var b) {
  require_same_tape(a, b, "cwise_mul");
  Tape& t = *a.tape;
  const Matrix& av = t.node_value(a.id);
  const Matrix& bv = t.node_value(b.id);
  require_shape(bv, av.rows(), av.cols(), "cwise_mul");
  return t.emit("cwise_mul", av.cwiseProduct(bv), {a.id, b.id},
                [pa = a.id, pb = b.id](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  t.node_grad(pa) += g.cwiseProduct(t.node_value(pb));
                  t.node_grad(pb) += g.cwiseProduct(t.node_value(pa));
                });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape;
  return t.emit("scale", t.node_value(a.id) * factor, {a.id},
                [pa = a.id, factor](Tape& t, int self) {
                  t.node_grad(pa) += factor * t.node_grad(self);
                });
}

Var scale_by(Var a, Var scalar) {
  require_same_tape(a, scalar, "scale_by");
  Tape& t = *a.tape;
  const Matrix& sv = t.node_value(scalar.id);
  require_shape(sv, 1, 1, "scale_by scalar");
  return t.emit("scale_by", t.node_value(a.id) * sv(0, 0), {a.id, scalar.id},
                [pa = a.id, ps = scalar.id](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  const Matrix& av = t.node_value(pa);
                  t.node_grad(pa) += g * t.node_value(ps)(0, 0);
                  double dot = 0.0;
                  for (Index i = 0; i < g.rows(); ++i)
                    for (Index j = 0; j < g.cols(); ++j) dot += g(i, j) * av(i, j);
                  t.node_grad(ps)(0, 0) += dot;
                });
}

Var add_row_broadcast(Var x, Var row) {
  require_same_tape(x, row, "add_row_broadcast");
  Tape& t = *x.tape;
  const Matrix& xv = t.node_value(x.id);
  const Matrix& rv = t.node_value(row.id);
  require_shape(rv, 1, xv.cols(), "add_row_broadcast row");
  Matrix out = xv;
  out.rowwise() += rv.row(0);
  return t.emit("add_row_broadcast", std::move(out), {x.id, row.id},
                [px = x.id, pr = row.id](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  t.node_grad(px) += g;
                  Matrix& rg = t.node_grad(pr);
                  for (Index i = 0; i < g.rows(); ++i)
                    for (Index j = 0; j < g.cols(); ++j) rg(0, j) += g(i, j);
                });
}

Var relu(Var x) {
  Tape& t = *x.tape;
  const Matrix& xv = t.node_value(x.id);
  return t.emit("relu", xv.cwiseMax(0.0), {x.id}, [px = x.id](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    const Matrix& xv = t.node_value(px);
    t.node_grad(px) += g.cwiseProduct((xv.array() > 0.0).cast<double>().matrix());
  });
}

Var tanh_act(Var x) {
  Tape& t = *x.tape;
  return t.emit("tanh", t.node_value(x.id).array().tanh().matrix(), {x.id},
                [px = x.id](Tape& t, int self) {
                  const Matrix& y = t.node_value(self);
                  t.node_grad(px) += t.node_grad(self).cwiseProduct(
                      (1.0 - y.array().square()).matrix());
                });
}

Var sigmoid(Var x) {
  Tape& t = *x.tape;
  const Matrix& xv = t.node_value(x.id);
  Matrix out(xv.rows(), xv.cols());
  for (Index i = 0; i < xv.rows(); ++i)
    for (Index j = 0; j < xv.cols(); ++j) {
      const double v = xv(i, j);
      out(i, j) = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                           : std::exp(v) / (1.0 + std::exp(v));
    }
  return t.emit("sigmoid", std::move(out), {x.id}, [px = x.id](Tape& t, int self) {
    const Matrix& y = t.node_value(self);
    t.node_grad(px) += t.node_grad(self).cwiseProduct(
        y.cwiseProduct((1.0 - y.array()).matrix()));
  });
}

Var softmax_rows(Var x) {
  Tape& t = *x.tape;
  return t.emit("softmax_rows", softmax_rows(t.node_value(x.id)), {x.id},
                [px = x.id](Tape& t, int self) {
                  const Matrix& y = t.node_value(self);
                  const Matrix& g = t.node_grad(self);
                  Matrix& xg = t.node_grad(px);
                  for (Index i = 0; i < y.rows(); ++i) {
                    double dot = 0.0;
                    for (Index j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                    for (Index j = 0; j < y.cols(); ++j)
                      xg(i, j) += y(i, j) * (g(i, j) - dot);
                  }
                });
}

Var scatter_softmax(Var x, std::vector<int> segment_ids, int num_segments) {
  Tape& t = *x.tape;
  Matrix out = scatter_softmax(t.node_value(x.id), segment_ids, num_segments);
  return t.emit("scatter_softmax", std::move(out), {x.id},
                [px = x.id, seg = std::move(segment_ids), num_segments](Tape& t, int self) {
                  const Matrix& y = t.node_value(self);
                  const Matrix& g = t.node_grad(self);
                  Matrix dots = Matrix::Zero(num_segments, y.cols());
                  for (Index i = 0; i < y.rows(); ++i)
                    for (Index j = 0; j < y.cols(); ++j)
                      dots(seg[static_cast<std::size_t>(i)], j) += g(i, j) * y(i, j);
                  Matrix& xg = t.node_grad(px);
                  for (Index i = 0; i < y.rows(); ++i)
                    for (Index j = 0; j < y.cols(); ++j)
                      xg(i, j) += y(i, j) * (g(i, j) - dots(seg[static_cast<std::size_t>(i)], j));
                });
}

Var scatter_sum(Var x, std::vector<int> segment_ids, int num_segments) {
  Tape& t = *x.tape;
  Matrix out = scatter_sum(t.node_value(x.id), segment_ids, num_segments);
  return t.emit("scatter_sum", std::move(out), {x.id},
                [px = x.id, seg = std::move(segment_ids)](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  Matrix& xg = t.node_grad(px);
                  for (Index i = 0; i < xg.rows(); ++i)
                    xg.row(i) += g.row(seg[static_cast<std::size_t>(i)]);
                });
}

Var gather_rows(Var x, std::vector<int> rows) {
  Tape& t = *x.tape;
  const Matrix& xv = t.node_value(x.id);
  Matrix out(static_cast<Index>(rows.size()), xv.cols());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] < 0 || rows[j] >= xv.rows())
      throw DataError("gather_rows: row index " + std::to_string(rows[j]) + " out of range");
    out.row(static_cast<Index>(j)) = xv.row(rows[j]);
  }
  return t.emit("gather_rows", std::move(out), {x.id},
                [px = x.id, rows = std::move(rows)](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  Matrix& xg = t.node_grad(px);
                  for (std::size_t j = 0; j < rows.size(); ++j)
                    xg.row(rows[j]) += g.row(static_cast<Index>(j));
                });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DataError("concat_cols: no parts");
  Tape& t = *parts[0].tape;
  const Index rows = t.node_value(parts[0].id).rows();
  Index cols = 0;
  std::vector<int> ids;
  for (Var part : parts) {
    require_same_tape(parts[0], part, "concat_cols");
    const Matrix& pv = t.node_value(part.id);
    if (pv.rows() != rows) throw DataError("concat_cols: row counts differ");
    cols += pv.cols();
    ids.push_back(part.id);
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (Var part : parts) {
    const Matrix& pv = t.node_value(part.id);
    out.middleCols(offset, pv.cols()) = pv;
    offset += pv.cols();
  }
  return t.emit("concat_cols", std::move(out), ids, [ids](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Index offset = 0;
    for (int id : ids) {
      Matrix& pg = t.node_grad(id);
      pg += g.middleCols(offset, pg.cols());
      offset += pg.cols();
    }
  });
}

Var slice_col(Var x, Index col) {
  Tape& t = *x.tape;
  const Matrix& xv = t.node_value(x.id);
  if (col < 0 || col >= xv.cols()) throw DataError("slice_col: column out of range");
  return t.emit("slice_col", xv.col(col), {x.id}, [px = x.id, col](Tape& t, int self) {
    t.node_grad(px).col(col) += t.node_grad(self).col(0);
  });
}

Var cwise_mul_col(Var x, Var column) {
  require_same_tape(x, column, "cwise_mul_col");
  Tape& t = *x.tape;
  const Matrix& xv = t.node_value(x.id);
  const Matrix& cv = t.node_value(column.id);
  require_shape(cv, xv.rows(), 1, "cwise_mul_col column");
  Matrix out = (xv.array().colwise() * cv.col(0).array()).matrix();
  return t.emit("cwise_mul_col", std::move(out), {x.id, column.id},
                [px = x.id, pc = column.id](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  const Matrix& xv = t.node_value(px);
                  const Matrix& cv = t.node_value(pc);
                  t.node_grad(px) += (g.array().colwise() * cv.col(0).array()).matrix();
                  Matrix& cg = t.node_grad(pc);
                  for (Index i = 0; i < g.rows(); ++i) {
                    double dot = 0.0;
                    for (Index j = 0; j < g.cols(); ++j) dot += g(i, j) * xv(i, j);
                    cg(i, 0) += dot;
                  }
                });
}

Var cwise_max(Var a, Var b) {
  require_same_tape(a, b, "cwise_max");
  Tape& t = *a.tape;
  const Matrix& av = t.node_value(a.id);
  const Matrix& bv = t.node_value(b.id);
  require_shape(bv, av.rows(), av.cols(), "cwise_max");
  // Ties route the gradient to the first operand.
  return t.emit("cwise_max", av.cwiseMax(bv), {a.id, b.id},
                [pa = a.id, pb = b.id](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  const Matrix& av = t.node_value(pa);
                  const Matrix& bv = t.node_value(pb);
                  Matrix& ag = t.node_grad(pa);
                  Matrix& bg = t.node_grad(pb);
                  for (Index i = 0; i < g.rows(); ++i)
                    for (Index j = 0; j < g.cols(); ++j) {
                      if (av(i, j) >= bv(i, j))
                        ag(i, j) += g(i, j);
                      else
                        bg(i, j) += g(i, j);
                    }
                });
}

Var code_lookup(Var scalars, std::vector<int> codes, Index rows, Index cols) {
  Tape& t = *scalars.tape;
  const Matrix& sv = t.node_value(scalars.id);
  if (sv.rows() != 1) throw DataError("code_lookup: scalars must be a row vector");
  if (static_cast<Index>(codes.size()) != rows * cols)
    throw DataError("code_lookup: code count does not match output shape");
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const int code = codes[static_cast<std::size_t>(i * cols + j)];
      if (code < 0 || code >= sv.cols()) throw DataError("code_lookup: code out of range");
      out(i, j) = sv(0, code);
    }
  return t.emit("code_lookup", std::move(out), {scalars.id},
                [ps = scalars.id, codes = std::move(codes), cols](Tape& t, int self) {
                  const Matrix& g = t.node_grad(self);
                  Matrix& sg = t.node_grad(ps);
                  for (Index i = 0; i < g.rows(); ++i)
                    for (Index j = 0; j < g.cols(); ++j)
                      sg(0, codes[static_cast<std::size_t>(i * cols + j)]) += g(i, j);
                });
}

Var sum_all(Var x) {
  Tape& t = *x.tape;
  const Matrix& xv = t.node_value(x.id);
  double total = 0.0;
  for (Index i = 0; i < xv.rows(); ++i)
    for (Index j = 0; j < xv.cols(); ++j) total += xv(i, j);
  Matrix out(1, 1);
  out(0, 0) = total;
  return t.emit("sum_all", std::move(out), {x.id}, [px = x.id](Tape& t, int self) {
    t.node_grad(px).array() += t.node_grad(self)(0, 0);
  });
}

Var mean_all(Var x) {
  Tape& t = *x.tape;
  const Matrix& xv = t.node_value(x.id);
  const double count = static_cast<double>(xv.rows() * xv.cols());
  return scale(sum_all(x), 1.0 / count);
}

Var cross_entropy_logits(Var logits, std::vector<int> labels) {
  Tape& t = *logits.tape;
  const Matrix& z = t.node_value(logits.id);
  if (static_cast<Index>(labels.size()) != z.rows())
    throw DataError("cross_entropy_logits: one label per row required");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= z.cols())
      throw DataError("cross_entropy_logits: label out of range");
  double total = 0.0;
  for (Index i = 0; i < z.rows(); ++i) {
    double row_max = z(i, 0);
    for (Index j = 1; j < z.cols(); ++j) row_max = std::max(row_max, z(i, j));
    double sum_exp = 0.0;
    for (Index j = 0; j < z.cols(); ++j) sum_exp += std::exp(z(i, j) - row_max);
    total += row_max + std::log(sum_exp) - z(i, labels[static_cast<std::size_t>(i)]);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(z.rows());
  return t.emit("cross_entropy_logits", std::move(out), {logits.id},
                [pz = logits.id, labels = std::move(labels)](Tape& t, int self) {
                  const double g = t.node_grad(self)(0, 0);
                  const Matrix& z = t.node_value(pz);
                  const Matrix probs = softmax_rows(z);
                  Matrix& zg = t.node_grad(pz);
                  const double inv_rows = 1.0 / static_cast<double>(z.rows());
                  for (Index i = 0; i < z.rows(); ++i)
                    for (Index j = 0; j < z.cols(); ++j) {
                      const double one_hot =
                          j == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                      zg(i, j) += g * inv_rows * (probs(i, j) - one_hot);
                    }
                });
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw DataError("unknown parameter: " + name);
  return it->second;
}

Matrix& ParamStore::at(const std::string& name) {
  auto it = values.find(name);
  if (it == values.end()) throw DataError("unknown parameter: " + name);
  return it->second;
}

double finite_difference_check(const std::function<double(const ParamStore&)>& f,
                               const ParamStore& params,
                               const std::map<std::string, Matrix>& analytic,
                               double eps, int coords_per_param, std::uint64_t seed,
                               std::string* worst_coordinate) {
  if (eps < 1e-7 || eps > 1e-3)
    throw UsageError("finite_difference_check: eps must lie in [1e-7, 1e-3]");
  Rng rng(seed);
  ParamStore probe = params;
  double worst = 0.0;
  for (const auto& [name, grad] : analytic) {
    Matrix& target = probe.at(name);
    if (grad.rows() != target.rows() || grad.cols() != target.cols())
      throw DataError("finite_difference_check: gradient shape mismatch for " + name);
    const Index size = target.rows() * target.cols();
    std::vector<Index> coords(static_cast<std::size_t>(size));
    for (Index i = 0; i < size; ++i) coords[static_cast<std::size_t>(i)] = i;
    if (coords_per_param > 0 && static_cast<Index>(coords_per_param) < size) {
      rng.shuffle(coords);
      coords.resize(static_cast<std::size_t>(coords_per_param));
      std::sort(coords.begin(), coords.end());
    }
    for (Index flat : coords) {
      const Index r = flat / target.cols();
      const Index c = flat % target.cols();
      const double saved = target(r, c);
      target(r, c) = saved + eps;
      const double up = f(probe);
      target(r, c) = saved - eps;
      const double down = f(probe);
      target(r, c) = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_difference_check: non-finite probe at " + name);
      const double central = (up - down) / (2.0 * eps);
      const double rel = std::abs(grad(r, c) - central) / std::max(1.0, std::abs(central));
      if (rel > worst) {
        worst = rel;
        if (worst_coordinate)
          *worst_coordinate = name + "(" + std::to_string(r) + "," + std::to_string(c) + ")";
      }
    }
  }
  return worst;
}

}  // namespace tng
