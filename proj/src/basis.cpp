#include "mlgp/basis.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <limits>

#include "mlgp/archive.hpp"

namespace mlgp {

namespace {

constexpr Index kOversampling = 10;
constexpr int kPowerIterations = 2;

MatrixXd gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

MatrixXd orthonormalize(const MatrixXd& m) {
  Eigen::HouseholderQR<MatrixXd> qr(m);
  return qr.householderQ() * MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace

SvdResult truncated_svd(const SparseMatrix& x, Index r, std::uint64_t seed) {
  const Index min_dim = std::min(x.n_rows, x.n_cols);
  if (r < 1 || r > min_dim)
    throw std::invalid_argument("truncated_svd: need 1 <= r <= min(N, D)");
  std::mt19937_64 rng(seed);

  const Index sketch = std::min(min_dim, r + kOversampling);
  // range finder: Q spans the dominant column space of X
  MatrixXd q = orthonormalize(x.multiply(gaussian_matrix(x.n_cols, sketch, rng)));
  for (int it = 0; it < kPowerIterations; ++it) {
    const MatrixXd z = orthonormalize(x.left_multiply(q.transpose()).transpose());
    q = orthonormalize(x.multiply(z));
  }

  const MatrixXd b = x.left_multiply(q.transpose());  // sketch x D
  Eigen::BDCSVD<MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);

  // numerical rank of the projected matrix
  const VectorXd& sv = svd.singularValues();
  const double tol = std::max(x.n_rows, x.n_cols) *
                     std::numeric_limits<double>::epsilon() *
                     (sv.size() > 0 ? sv[0] : 0.0);
  Index rank = 0;
  while (rank < sv.size() && sv[rank] > tol) ++rank;

  SvdResult out;
  out.rank_deficient = rank < r;
  const Index keep = std::min(r, std::max<Index>(rank, 1));
  out.u = q * svd.matrixU().leftCols(keep);
  out.s = sv.head(keep);
  out.basis_rows = svd.matrixV().leftCols(keep).transpose();
  return out;
}

Basis build_basis(const SparseMatrix& x, Index r, bool precompute_cross,
                  std::uint64_t seed) {
  SvdResult svd = truncated_svd(x, r, seed);
  Basis basis;
  basis.x_tilde = std::move(svd.basis_rows);
  basis.left_vectors = std::move(svd.u);
  basis.singular_values = std::move(svd.s);
  basis.rank_deficient = svd.rank_deficient;
  basis.gram_tilde = basis.x_tilde * basis.x_tilde.transpose();
  if (precompute_cross) basis.cross_gram = x.multiply_transposed(basis.x_tilde);
  return basis;
}

namespace detail {

MatrixXd kmeans(const MatrixXd& points, Index m, int iters,
                std::mt19937_64& rng, std::vector<double>* objective) {
  const Index n = points.rows();
  if (m < 1 || m > n)
    throw std::invalid_argument("kmeans: need 1 <= m <= number of points");
  std::uniform_int_distribution<Index> any_row(0, n - 1);

  // k-means++ seeding
  MatrixXd centroids(m, points.cols());
  centroids.row(0) = points.row(any_row(rng));
  VectorXd dist2 =
      (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < m; ++c) {
    const double total = dist2.sum();
    Index chosen;
    if (total <= 0.0) {
      chosen = any_row(rng);
    } else {
      std::uniform_real_distribution<double> unif(0.0, total);
      double target = unif(rng);
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= dist2[i];
        if (target <= 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(chosen);
    dist2 = dist2.cwiseMin(
        (points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  std::vector<Index> assign(n);
  for (int it = 0; it < iters; ++it) {
    double sse = 0.0;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
      for (Index c = 1; c < m; ++c) {
        const double d = (points.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
      sse += best_d;
    }
    if (objective) objective->push_back(sse);

    MatrixXd sums = MatrixXd::Zero(m, points.cols());
    std::vector<Index> counts(m, 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += points.row(i);
      ++counts[assign[i]];
    }
    for (Index c = 0; c < m; ++c) {
      if (counts[c] == 0)
        centroids.row(c) = points.row(any_row(rng));  // re-seed empty cluster
      else
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
    }
  }
  return centroids;
}

}  // namespace detail

MatrixXd init_subspace_coeffs(const Basis& basis, Index m, int kmeans_iters,
                              std::mt19937_64& rng) {
  return detail::kmeans(basis.scaled_left(), m, kmeans_iters, rng);
}

void save_basis(const Basis& basis, const std::string& path) {
  Archive a;
  a.put_int("format_version", 1);
  a.put_matrix("x_tilde", basis.x_tilde);
  a.put_matrix("gram_tilde", basis.gram_tilde);
  a.put_matrix("left_vectors", basis.left_vectors);
  a.put_vector("singular_values", basis.singular_values);
  a.put_int("rank_deficient", basis.rank_deficient ? 1 : 0);
  if (basis.cross_gram) a.put_matrix("cross_gram", *basis.cross_gram);
  a.save(path);
}

Basis load_basis(const std::string& path) {
  Archive a = Archive::load(path);
  if (a.get_int("format_version") != 1)
    throw IoError("basis: unsupported format version in '" + path + "'");
  Basis basis;
  basis.x_tilde = a.get_matrix("x_tilde");
  basis.gram_tilde = a.get_matrix("gram_tilde");
  basis.left_vectors = a.get_matrix("left_vectors");
  basis.singular_values = a.get_vector("singular_values");
  basis.rank_deficient = a.get_int("rank_deficient") != 0;
  if (a.has("cross_gram")) basis.cross_gram = a.get_matrix("cross_gram");
  return basis;
}

}  // namespace mlgp
