#ifndef MLGP_BASIS_HPP
#define MLGP_BASIS_HPP

#include <cstdint>
#include <optional>
#include <random>

#include "mlgp/sparse.hpp"

namespace mlgp {

struct SvdResult {
  MatrixXd u;          // N x r, orthonormal columns
  VectorXd s;          // r, positive non-increasing
  MatrixXd basis_rows; // r x D, orthonormal rows (right singular vectors)
  bool rank_deficient{false};  // requested rank exceeded the numerical rank
};

// Rank-r truncated SVD of a sparse matrix via a randomized range finder
// (2 power iterations, oversampling 10, re-orthonormalized each pass).
// If r exceeds the numerical rank the achievable rank is returned and the
// result is flagged instead of failing.
SvdResult truncated_svd(const SparseMatrix& x, Index r, std::uint64_t seed);

// The precomputed subspace: basis rows ~X, the R x R Gram K_~X, the SVD
// factors U and S used for initialization, and optionally the N x R cross
// Gram K_{X ~X} so per-step cross products never touch D.
struct Basis {
  MatrixXd x_tilde;      // R x D
  MatrixXd gram_tilde;   // R x R = ~X ~X^T
  MatrixXd left_vectors; // N x R
  VectorXd singular_values;
  std::optional<MatrixXd> cross_gram;  // N x R = X ~X^T
  bool rank_deficient{false};

  Index rank() const { return x_tilde.rows(); }
  Index input_dim() const { return x_tilde.cols(); }
  MatrixXd scaled_left() const {  // U diag(S), the k-means space
    return left_vectors * singular_values.asDiagonal();
  }
};

Basis build_basis(const SparseMatrix& x, Index r, bool precompute_cross,
                  std::uint64_t seed);

// Rows of A are the M centroids of k-means (k-means++ seeding, Lloyd
// iterations) over U diag(S); an emptied cluster is re-seeded from a random
// data row.
MatrixXd init_subspace_coeffs(const Basis& basis, Index m, int kmeans_iters,
                              std::mt19937_64& rng);

void save_basis(const Basis& basis, const std::string& path);
Basis load_basis(const std::string& path);

namespace detail {
// Lloyd iterations exposed for tests; returns the centroids and fills
// objective with the within-cluster sum of squares after every iteration.
MatrixXd kmeans(const MatrixXd& points, Index m, int iters,
                std::mt19937_64& rng, std::vector<double>* objective = nullptr);
}  // namespace detail

}  // namespace mlgp

#endif
