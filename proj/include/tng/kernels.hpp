#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tng/error.hpp"
#include "tng/types.hpp"

namespace tng {

// Dense kernels shared by the forward pass and the gradient tape. Reductions
// run left to right so results are bitwise reproducible.

template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& input) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> x = input;
  if (!x.allFinite()) throw NumericError("softmax_rows: non-finite input");
  MatrixX<Scalar> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar row_max = x(i, 0);
    for (Index j = 1; j < x.cols(); ++j) row_max = std::max(row_max, x(i, j));
    Scalar total = 0;
    for (Index j = 0; j < x.cols(); ++j) {
      out(i, j) = std::exp(x(i, j) - row_max);
      total += out(i, j);
    }
    for (Index j = 0; j < x.cols(); ++j) out(i, j) /= total;
  }
  return out;
}

inline void check_segment_ids(const std::vector<int>& segment_ids, Index rows,
                              int num_segments, const char* op) {
  if (static_cast<Index>(segment_ids.size()) != rows)
    throw DataError(std::string(op) + ": segment id count does not match row count");
  for (std::size_t i = 0; i < segment_ids.size(); ++i) {
    if (segment_ids[i] < 0 || segment_ids[i] >= num_segments)
      throw DataError(std::string(op) + ": segment id " + std::to_string(segment_ids[i]) +
                      " out of range at row " + std::to_string(i));
  }
}

// Softmax normalization performed independently within each segment, per
// column. Max subtraction is also per segment.
template <typename Derived>
MatrixX<typename Derived::Scalar> scatter_softmax(const Eigen::MatrixBase<Derived>& values,
                                                  const std::vector<int>& segment_ids,
                                                  int num_segments) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> x = values;
  if (!x.allFinite()) throw NumericError("scatter_softmax: non-finite input");
  check_segment_ids(segment_ids, x.rows(), num_segments, "scatter_softmax");
  const Index cols = x.cols();
  MatrixX<Scalar> seg_max = MatrixX<Scalar>::Constant(num_segments, cols,
                                                      -std::numeric_limits<Scalar>::infinity());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < cols; ++j)
      seg_max(segment_ids[i], j) = std::max(seg_max(segment_ids[i], j), x(i, j));
  MatrixX<Scalar> out(x.rows(), cols);
  MatrixX<Scalar> seg_sum = MatrixX<Scalar>::Zero(num_segments, cols);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < cols; ++j) {
      out(i, j) = std::exp(x(i, j) - seg_max(segment_ids[i], j));
      seg_sum(segment_ids[i], j) += out(i, j);
    }
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) /= seg_sum(segment_ids[i], j);
  return out;
}

// Row s of the result is the sum of all value rows with segment id s; segments
// nobody references stay zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> scatter_sum(const Eigen::MatrixBase<Derived>& values,
                                              const std::vector<int>& segment_ids,
                                              int num_segments) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> x = values;
  check_segment_ids(segment_ids, x.rows(), num_segments, "scatter_sum");
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(num_segments, x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) out(segment_ids[i], j) += x(i, j);
  if (!out.allFinite()) throw NumericError("scatter_sum: non-finite result");
  return out;
}

}  // namespace tng
