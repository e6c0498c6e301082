#include "mlgp/kernel.hpp"

namespace mlgp {

namespace {

void require_subspace_basis(const InducingRepresentation& rep,
                            const Basis* basis) {
  if (rep.is_subspace()) {
    if (basis == nullptr)
      throw std::invalid_argument("kernel: subspace mode requires a basis");
    if (rep.coeffs.cols() != basis->rank())
      throw std::invalid_argument("kernel: A columns must match basis rank");
  }
}

}  // namespace

GramCache compute_gram(const InducingRepresentation& rep,
                       const KernelSpec& spec, const Basis* basis) {
  require_subspace_basis(rep, basis);
  GramCache cache;
  if (rep.is_subspace()) {
    cache.lin.noalias() = rep.coeffs * basis->gram_tilde * rep.coeffs.transpose();
  } else {
    cache.lin.noalias() = rep.coeffs * rep.coeffs.transpose();
  }
  // enforce exact symmetry (transpose aliases, so evaluate first)
  cache.lin = MatrixXd(0.5 * (cache.lin + cache.lin.transpose().eval()));

  if (!spec.is_se()) {
    cache.k_z = cache.lin;
    return cache;
  }
  const double inv_two_ell2 =
      1.0 / (2.0 * spec.lengthscale() * spec.lengthscale());
  const double var = spec.variance();
  const VectorXd dg = cache.lin.diagonal();
  const Index m = cache.lin.rows();
  cache.k_z.resize(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) {
      const double dz = std::max(dg[i] + dg[j] - 2.0 * cache.lin(i, j), 0.0);
      cache.k_z(i, j) = var * std::exp(-dz * inv_two_ell2);
    }
  }
  return cache;
}

CrossCache compute_cross(const SparseMatrix& xb,
                         std::span<const Index> source_rows,
                         const InducingRepresentation& rep,
                         const KernelSpec& spec, const Basis* basis,
                         const GramCache& gram) {
  require_subspace_basis(rep, basis);
  CrossCache cache;
  if (rep.is_subspace()) {
    if (!source_rows.empty() && basis->cross_gram) {
      cache.basis_prod.resize(static_cast<Index>(source_rows.size()),
                              basis->rank());
      for (Index b = 0; b < cache.basis_prod.rows(); ++b) {
        if (source_rows[b] < 0 || source_rows[b] >= basis->cross_gram->rows())
          throw std::invalid_argument(
              "kernel: batch row id outside the precomputed cross gram");
        cache.basis_prod.row(b) = basis->cross_gram->row(source_rows[b]);
      }
    } else {
      if (xb.n_cols != basis->input_dim())
        throw std::invalid_argument("kernel: batch dimension does not match basis");
      cache.basis_prod = xb.multiply_transposed(basis->x_tilde);
    }
    cache.lin.noalias() = cache.basis_prod * rep.coeffs.transpose();
  } else {
    if (xb.n_cols != rep.coeffs.cols())
      throw std::invalid_argument("kernel: batch dimension does not match Z");
    cache.lin = xb.multiply_transposed(rep.coeffs);
  }

  if (!spec.is_se()) {
    cache.k_xz = cache.lin;
    return cache;
  }
  cache.x_sqnorm.resize(xb.n_rows);
  for (Index i = 0; i < xb.n_rows; ++i)
    cache.x_sqnorm[i] = xb.row_squared_norm(i);
  const double inv_two_ell2 =
      1.0 / (2.0 * spec.lengthscale() * spec.lengthscale());
  const double var = spec.variance();
  const VectorXd dg = gram.lin.diagonal();
  cache.k_xz.resize(cache.lin.rows(), cache.lin.cols());
  for (Index j = 0; j < cache.lin.cols(); ++j) {
    for (Index i = 0; i < cache.lin.rows(); ++i) {
      const double dz =
          std::max(cache.x_sqnorm[i] + dg[j] - 2.0 * cache.lin(i, j), 0.0);
      cache.k_xz(i, j) = var * std::exp(-dz * inv_two_ell2);
    }
  }
  return cache;
}

VectorXd prior_diag(const SparseMatrix& xb, const KernelSpec& spec) {
  if (spec.is_se())
    return VectorXd::Constant(xb.n_rows, spec.variance());
  VectorXd diag(xb.n_rows);
  for (Index i = 0; i < xb.n_rows; ++i) diag[i] = xb.row_squared_norm(i);
  return diag;
}

MatrixXd gram_inducing(const InducingRepresentation& rep,
                       const KernelSpec& spec, const Basis* basis) {
  GramCache cache = compute_gram(rep, spec, basis);
  if (!cache.k_z.allFinite())
    throw NumericError("kernel gram: non-finite entries (inducing block)");
  return std::move(cache.k_z);
}

MatrixXd cross_gram(const Minibatch& batch, const InducingRepresentation& rep,
                    const KernelSpec& spec, const Basis* basis) {
  const GramCache gram = compute_gram(rep, spec, basis);
  CrossCache cache = compute_cross(batch.features, batch.row_indices, rep,
                                   spec, basis, gram);
  if (!cache.k_xz.allFinite())
    throw NumericError("kernel cross gram: non-finite entries (batch block)");
  return std::move(cache.k_xz);
}

}  // namespace mlgp
