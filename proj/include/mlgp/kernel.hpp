#ifndef MLGP_KERNEL_HPP
#define MLGP_KERNEL_HPP

#include <span>

#include "mlgp/basis.hpp"
#include "mlgp/sampler.hpp"

namespace mlgp {

// Kernel hyperparameters live in the log domain so gradient ascent never
// needs a positivity projection.  The linear kernel is the plain inner
// product and has no hyperparameters.
struct KernelSpec {
  enum class Kind { linear, squared_exponential };
  Kind kind{Kind::linear};
  double log_variance{0.0};    // log sigma^2 (SE only)
  double log_lengthscale{0.0}; // log ell     (SE only)

  double variance() const { return std::exp(log_variance); }
  double lengthscale() const { return std::exp(log_lengthscale); }
  bool is_se() const { return kind == Kind::squared_exponential; }
};

// Inducing inputs, either free rows Z (M x D) or subspace coefficients A
// (M x R) against a Basis; exactly one interpretation is active.
struct InducingRepresentation {
  enum class Mode { subspace, free_z };
  Mode mode{Mode::subspace};
  MatrixXd coeffs;  // A in subspace mode, Z in free mode

  static InducingRepresentation subspace(MatrixXd a) {
    return {Mode::subspace, std::move(a)};
  }
  static InducingRepresentation free_rows(MatrixXd z) {
    return {Mode::free_z, std::move(z)};
  }
  Index m() const { return coeffs.rows(); }
  bool is_subspace() const { return mode == Mode::subspace; }
};

// Forward cache of the inducing Gram: the linear part Q = Z Z^T (computed as
// A K_~X A^T in subspace mode, never touching D) and the kernel matrix K_Z.
struct GramCache {
  MatrixXd lin;  // M x M
  MatrixXd k_z;  // M x M (aliases lin's values for the linear kernel)
};

GramCache compute_gram(const InducingRepresentation& rep,
                       const KernelSpec& spec, const Basis* basis);

// Forward cache of a batch cross Gram.  basis_prod holds K_{Xb ~X} in
// subspace mode (the quantity the A-gradient needs); x_sqnorm holds the raw
// squared row norms the SE kernel needs.
struct CrossCache {
  MatrixXd basis_prod;  // |B| x R, subspace mode only
  MatrixXd lin;         // |B| x M
  MatrixXd k_xz;        // |B| x M
  VectorXd x_sqnorm;    // |B|, SE only
};

// source_rows, when non-empty, are the dataset row ids of xb and enable
// slicing a precomputed basis cross_gram instead of multiplying by ~X.
CrossCache compute_cross(const SparseMatrix& xb,
                         std::span<const Index> source_rows,
                         const InducingRepresentation& rep,
                         const KernelSpec& spec, const Basis* basis,
                         const GramCache& gram);

// Diagonal of the prior kernel at the batch points, k(x_i, x_i).
VectorXd prior_diag(const SparseMatrix& xb, const KernelSpec& spec);

// Contract-level entry points (validated, finite-checked).
MatrixXd gram_inducing(const InducingRepresentation& rep,
                       const KernelSpec& spec, const Basis* basis);
MatrixXd cross_gram(const Minibatch& batch, const InducingRepresentation& rep,
                    const KernelSpec& spec, const Basis* basis);

}  // namespace mlgp

#endif
