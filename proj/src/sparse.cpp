#include "mlgp/sparse.hpp"

#include <cmath>
#include <stdexcept>

namespace mlgp {

SparseMatrix::SparseMatrix(Index rows, Index cols,
                           std::vector<std::int64_t> offsets,
                           std::vector<std::int64_t> cols_idx,
                           std::vector<double> vals)
    : n_rows(rows),
      n_cols(cols),
      row_offsets(std::move(offsets)),
      col_indices(std::move(cols_idx)),
      values(std::move(vals)) {
  validate();
}

void SparseMatrix::validate() const {
  if (n_rows < 0 || n_cols < 0)
    throw std::invalid_argument("sparse: negative dimensions");
  if (row_offsets.size() != static_cast<std::size_t>(n_rows) + 1)
    throw std::invalid_argument("sparse: row_offsets must have n_rows+1 entries");
  if (row_offsets.front() != 0)
    throw std::invalid_argument("sparse: row_offsets must start at 0");
  if (row_offsets.back() != static_cast<std::int64_t>(values.size()))
    throw std::invalid_argument("sparse: last row offset must equal nnz");
  if (col_indices.size() != values.size())
    throw std::invalid_argument("sparse: col_indices/values size mismatch");
  for (Index i = 0; i < n_rows; ++i) {
    if (row_offsets[i + 1] < row_offsets[i])
      throw std::invalid_argument("sparse: row_offsets must be non-decreasing");
    for (std::int64_t t = row_offsets[i]; t < row_offsets[i + 1]; ++t) {
      if (col_indices[t] < 0 || col_indices[t] >= n_cols)
        throw std::invalid_argument("sparse: column index out of range");
      if (t > row_offsets[i] && col_indices[t] <= col_indices[t - 1])
        throw std::invalid_argument(
            "sparse: column indices must be strictly increasing within a row");
      if (!std::isfinite(values[t]))
        throw std::invalid_argument("sparse: non-finite value");
    }
  }
}

double SparseMatrix::row_squared_norm(Index i) const {
  double acc = 0.0;
  for (std::int64_t t = row_offsets[i]; t < row_offsets[i + 1]; ++t)
    acc += values[t] * values[t];
  return acc;
}

MatrixXd SparseMatrix::multiply(const Eigen::Ref<const MatrixXd>& b) const {
  if (b.rows() != n_cols)
    throw std::invalid_argument("sparse multiply: dimension mismatch");
  MatrixXd out = MatrixXd::Zero(n_rows, b.cols());
  for (Index i = 0; i < n_rows; ++i)
    for (std::int64_t t = row_offsets[i]; t < row_offsets[i + 1]; ++t)
      out.row(i).noalias() += values[t] * b.row(col_indices[t]);
  return out;
}

MatrixXd SparseMatrix::multiply_transposed(
    const Eigen::Ref<const MatrixXd>& m) const {
  if (m.cols() != n_cols)
    throw std::invalid_argument("sparse multiply_transposed: dimension mismatch");
  const Index k = m.rows();
  MatrixXd out = MatrixXd::Zero(n_rows, k);
  VectorXd acc(k);
  for (Index i = 0; i < n_rows; ++i) {
    acc.setZero();
    for (std::int64_t t = row_offsets[i]; t < row_offsets[i + 1]; ++t)
      acc.noalias() += values[t] * m.col(col_indices[t]);  // contiguous column
    out.row(i) = acc.transpose();
  }
  return out;
}

MatrixXd SparseMatrix::left_multiply(const Eigen::Ref<const MatrixXd>& q) const {
  if (q.cols() != n_rows)
    throw std::invalid_argument("sparse left_multiply: dimension mismatch");
  MatrixXd out = MatrixXd::Zero(q.rows(), n_cols);
  for (Index i = 0; i < n_rows; ++i)
    for (std::int64_t t = row_offsets[i]; t < row_offsets[i + 1]; ++t)
      out.col(col_indices[t]).noalias() += values[t] * q.col(i);
  return out;
}

SparseMatrix SparseMatrix::select_rows(std::span<const Index> rows) const {
  SparseMatrix out;
  out.n_rows = static_cast<Index>(rows.size());
  out.n_cols = n_cols;
  out.row_offsets.assign(1, 0);
  out.row_offsets.reserve(rows.size() + 1);
  for (Index r : rows) {
    if (r < 0 || r >= n_rows)
      throw std::invalid_argument("sparse select_rows: row index out of range");
    for (std::int64_t t = row_offsets[r]; t < row_offsets[r + 1]; ++t) {
      out.col_indices.push_back(col_indices[t]);
      out.values.push_back(values[t]);
    }
    out.row_offsets.push_back(static_cast<std::int64_t>(out.values.size()));
  }
  return out;
}

SparseMatrix SparseMatrix::with_padded_cols(Index new_n_cols) const {
  if (new_n_cols < n_cols)
    throw std::invalid_argument("sparse with_padded_cols: cannot shrink");
  SparseMatrix out = *this;
  out.n_cols = new_n_cols;
  return out;
}

MatrixXd SparseMatrix::to_dense() const {
  MatrixXd out = MatrixXd::Zero(n_rows, n_cols);
  for (Index i = 0; i < n_rows; ++i)
    for (std::int64_t t = row_offsets[i]; t < row_offsets[i + 1]; ++t)
      out(i, col_indices[t]) = values[t];
  return out;
}

SparseMatrix SparseMatrix::from_dense(const Eigen::Ref<const MatrixXd>& m,
                                      double drop_below) {
  SparseMatrix out;
  out.n_rows = m.rows();
  out.n_cols = m.cols();
  out.row_offsets.assign(1, 0);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) > drop_below) {
        out.col_indices.push_back(j);
        out.values.push_back(m(i, j));
      }
    }
    out.row_offsets.push_back(static_cast<std::int64_t>(out.values.size()));
  }
  return out;
}

}  // namespace mlgp
