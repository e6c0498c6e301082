#include "mlgp/variational.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace mlgp {

MatrixXd stable_factorize(const MatrixXd& k_z, const VectorXd& sigma_diag) {
  if (k_z.rows() != k_z.cols() || k_z.rows() != sigma_diag.size())
    throw std::invalid_argument("stable_factorize: dimension mismatch");
  if ((sigma_diag.array() < kSigmaFloor * (1.0 - 1e-12)).any())
    throw std::invalid_argument("stable_factorize: sigma below the floor");
  MatrixXd c = k_z;
  c.diagonal() += sigma_diag;
  Eigen::LLT<MatrixXd> llt(c);
  if (llt.info() != Eigen::Success)
    throw NumericError("stable_factorize: Cholesky of K_Z + Sigma failed "
                       "(K_Z is not a valid covariance)");
  return llt.matrixL();
}

LatentMarginals latent_marginals(const MatrixXd& cross,
                                 const VectorXd& prior_diag,
                                 const VariationalFactors& factors,
                                 const std::vector<MatrixXd>& chol_factors) {
  const Index n = cross.rows();
  const Index p_total = factors.latents();
  if (static_cast<Index>(chol_factors.size()) != p_total)
    throw std::invalid_argument("latent_marginals: need one factor per process");
  if (prior_diag.size() != n)
    throw std::invalid_argument("latent_marginals: prior diagonal size mismatch");

  LatentMarginals out;
  out.m.resize(n, p_total);
  out.s.resize(n, p_total);
  for (Index p = 0; p < p_total; ++p) {
    out.m.col(p).noalias() = cross * factors.mu.row(p).transpose();
    // v = L^{-1} k(Z, x_i) for the whole batch at once
    const MatrixXd v = chol_factors[p]
                           .triangularView<Eigen::Lower>()
                           .solve(cross.transpose());
    out.s.col(p) = prior_diag - v.colwise().squaredNorm().transpose();
  }
  if (out.s.size() > 0) {
    const double worst = out.s.minCoeff();
    if (worst < -1e-8)
      throw NumericError("latent_marginals: negative variance " +
                         std::to_string(worst));
    out.s = out.s.cwiseMax(0.0);
  }
  return out;
}

UtilityMarginal utility_marginal(const Eigen::Ref<const VectorXd>& phi_row,
                                 double bias,
                                 const Eigen::Ref<const VectorXd>& m_row,
                                 const Eigen::Ref<const VectorXd>& s_row) {
  return {phi_row.dot(m_row) + bias,
          (phi_row.array().square() * s_row.array()).sum()};
}

double kl_term(const MatrixXd& k_z, const Eigen::Ref<const VectorXd>& mu,
               const VectorXd& sigma_diag, const MatrixXd& factor) {
  const Index m = k_z.rows();
  const double quad = mu.dot(k_z * mu);

  // tr((K_Z+Sigma)^{-1} K_Z) = M - tr((K_Z+Sigma)^{-1} Sigma)
  //                          = M - sum_j sigma_j ||L^{-1} e_j||^2
  const MatrixXd inv_l =
      factor.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(m, m));
  const double trace =
      static_cast<double>(m) -
      (inv_l.array().square().colwise().sum().transpose() * sigma_diag.array())
          .sum();

  double logdet_c = 0.0;
  for (Index j = 0; j < m; ++j) logdet_c += std::log(factor(j, j));
  logdet_c *= 2.0;
  const double logdet_sigma = sigma_diag.array().log().sum();

  return 0.5 * (quad - trace + logdet_c - logdet_sigma);
}

}  // namespace mlgp
