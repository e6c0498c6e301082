#ifndef MLGP_SPARSE_HPP
#define MLGP_SPARSE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "mlgp/common.hpp"

namespace mlgp {

// Compressed sparse row matrix of doubles.  Immutable after construction;
// holds the design matrix X and its minibatch row slices.
struct SparseMatrix {
  Index n_rows{0};
  Index n_cols{0};
  std::vector<std::int64_t> row_offsets;  // length n_rows + 1, non-decreasing
  std::vector<std::int64_t> col_indices;  // strictly increasing within a row
  std::vector<double> values;

  SparseMatrix() : row_offsets{0} {}
  SparseMatrix(Index rows, Index cols, std::vector<std::int64_t> offsets,
               std::vector<std::int64_t> cols_idx, std::vector<double> vals);

  Index nnz() const { return static_cast<Index>(values.size()); }
  Index row_nnz(Index i) const {
    return static_cast<Index>(row_offsets[i + 1] - row_offsets[i]);
  }

  // Throws std::invalid_argument if any CSR invariant is violated.
  void validate() const;

  double row_squared_norm(Index i) const;

  // (*this) * b where b is n_cols x k dense; result n_rows x k.
  MatrixXd multiply(const Eigen::Ref<const MatrixXd>& b) const;

  // (*this) * m^T where m is k x n_cols dense; result n_rows x k.
  // This is the workhorse for cross-gram blocks K_{Xb ~X} = Xb * ~X^T.
  MatrixXd multiply_transposed(const Eigen::Ref<const MatrixXd>& m) const;

  // q * (*this) where q is k x n_rows dense; result k x n_cols.
  MatrixXd left_multiply(const Eigen::Ref<const MatrixXd>& q) const;

  SparseMatrix select_rows(std::span<const Index> rows) const;

  // Same values, wider column space (columns beyond the old n_cols are zero).
  SparseMatrix with_padded_cols(Index new_n_cols) const;

  MatrixXd to_dense() const;
  static SparseMatrix from_dense(const Eigen::Ref<const MatrixXd>& m,
                                 double drop_below = 0.0);
};

}  // namespace mlgp

#endif
