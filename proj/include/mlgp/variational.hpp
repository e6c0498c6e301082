#ifndef MLGP_VARIATIONAL_HPP
#define MLGP_VARIATIONAL_HPP

#include <vector>

#include "mlgp/common.hpp"

namespace mlgp {

// Lower bound on every Sigma_p diagonal entry; exp(raw) + floor keeps the
// factorization of K_Z + Sigma_p stable without any jitter.
constexpr double kSigmaFloor = 1e-6;

// The O(M) family: q(u_p) = N(K_Z mu_p, (K_Z^{-1} + Sigma_p^{-1})^{-1}) with
// diagonal Sigma_p = exp(log_sigma_p) + floor, i.e. 2M parameters per latent
// process.
struct VariationalFactors {
  MatrixXd mu;         // P x M
  MatrixXd log_sigma;  // P x M, raw (unconstrained)

  Index latents() const { return mu.rows(); }
  VectorXd sigma_diag(Index p) const {
    return log_sigma.row(p).array().exp() + kSigmaFloor;
  }
  static VariationalFactors zeros(Index p, Index m) {
    return {MatrixXd::Zero(p, m), MatrixXd::Zero(p, m)};
  }
};

// Lower Cholesky factor of K_Z + diag(sigma_diag); Sigma provides the
// diagonal inflation so no jitter is ever added to K_Z itself.
MatrixXd stable_factorize(const MatrixXd& k_z, const VectorXd& sigma_diag);

// Marginals of the latent processes at the batch points.
struct LatentMarginals {
  MatrixXd m;  // |B| x P
  MatrixXd s;  // |B| x P, within [0, k(x_i, x_i)] up to round-off
};

// m_p(i) = k(x_i, Z) mu_p;
// s_p(i) = k(x_i, x_i) - k(x_i, Z) (K_Z + Sigma_p)^{-1} k(Z, x_i),
// computed via triangular solves against the per-process factors.
// Negative variances beyond -1e-8 raise NumericError; smaller round-off
// negatives are clamped to zero.
LatentMarginals latent_marginals(const MatrixXd& cross,
                                 const VectorXd& prior_diag,
                                 const VariationalFactors& factors,
                                 const std::vector<MatrixXd>& chol_factors);

// The univariate Gaussian over a utility score f_k.
struct UtilityMarginal {
  double mean;
  double var;
};

// mean = sum_p phi_kp m_p(i) + b_k,  var = sum_p phi_kp^2 s_p(i).
UtilityMarginal utility_marginal(const Eigen::Ref<const VectorXd>& phi_row,
                                 double bias,
                                 const Eigen::Ref<const VectorXd>& m_row,
                                 const Eigen::Ref<const VectorXd>& s_row);

// KL[q(u_p) || p(u_p)] =
//   1/2 mu^T K_Z mu - 1/2 tr((K_Z+Sigma)^{-1} K_Z)
//   + 1/2 log|K_Z+Sigma| - 1/2 log|Sigma|.
// All K_Z inverses and determinants cancel; only the factor of K_Z + Sigma
// is used and K_Z alone is never decomposed.
double kl_term(const MatrixXd& k_z, const Eigen::Ref<const VectorXd>& mu,
               const VectorXd& sigma_diag, const MatrixXd& factor);

}  // namespace mlgp

#endif
