#include "mlgp/bound.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>

namespace mlgp {

namespace {

// Single pass over one minibatch: value of the estimator and, when grads is
// non-null, every analytic derivative.
double evaluate(const ModelState& state, const Minibatch& batch, Index n_total,
                const Basis* basis, const QuadratureRule& rule,
                GradientBundle* grads) {
  state.validate();
  const Index nb = batch.size();  // empty batch means KL terms only
  const Index np = state.dims.p;

  const GramCache gram = compute_gram(state.rep, state.kernel, basis);
  const CrossCache cross = compute_cross(batch.features, batch.row_indices,
                                         state.rep, state.kernel, basis, gram);
  const VectorXd kappa = prior_diag(batch.features, state.kernel);
  if (!gram.k_z.allFinite())
    throw NumericError("bound: non-finite inducing gram (rep block)");
  if (!cross.k_xz.allFinite())
    throw NumericError("bound: non-finite cross gram (rep block)");

  // one factorization of K_Z + Sigma_p per process, shared by marginals,
  // KL and the backward pass
  std::vector<MatrixXd> chol(np);
  std::vector<VectorXd> sigmas(np);
  for (Index p = 0; p < np; ++p) {
    sigmas[p] = state.factors.sigma_diag(p);
    chol[p] = stable_factorize(gram.k_z, sigmas[p]);
  }
  const LatentMarginals marg =
      latent_marginals(cross.k_xz, kappa, state.factors, chol);

  const double scale =
      nb > 0 ? static_cast<double>(n_total) / static_cast<double>(nb) : 0.0;

  double value = 0.0;
  MatrixXd am, as;  // d value / d m_p(i), d value / d s_p(i)
  if (grads) {
    *grads = GradientBundle::zeros_like(state);
    am = MatrixXd::Zero(nb, np);
    as = MatrixXd::Zero(nb, np);
  }

  auto accumulate = [&](Index i, LabelIndex label, int y, double weight) {
    const auto um = utility_marginal(state.phi.row(label).transpose(),
                                     state.bias[label],
                                     marg.m.row(i).transpose(),
                                     marg.s.row(i).transpose());
    const auto q = expected_log_logistic(y, um.mean, um.var, rule);
    value -= weight * q.value;
    if (grads) {
      const double alpha = -weight * q.d_mean;
      const double beta = -weight * q.d_var;
      grads->bias[label] += alpha;
      grads->phi.row(label) +=
          alpha * marg.m.row(i) +
          2.0 * beta * (state.phi.row(label).array() * marg.s.row(i).array())
                           .matrix();
      am.row(i) += alpha * state.phi.row(label);
      as.row(i) += beta * state.phi.row(label).array().square().matrix();
    }
  };

  for (Index i = 0; i < nb; ++i) {
    for (LabelIndex k : batch.positives[i]) accumulate(i, k, +1, scale);
    const double w = scale * batch.negative_weight(i);
    for (LabelIndex l : batch.negatives[i]) accumulate(i, l, -1, w);
  }

  // KL terms and, if requested, everything that flows through K_Z and the
  // cross gram
  MatrixXd g_k, g_x;  // d value / d K_Z, d value / d K_{Xb Z}
  if (grads) {
    g_k = MatrixXd::Zero(gram.k_z.rows(), gram.k_z.cols());
    g_x = MatrixXd::Zero(nb, gram.k_z.rows());
  }
  for (Index p = 0; p < np; ++p) {
    value -= kl_term(gram.k_z, state.factors.mu.row(p).transpose(), sigmas[p],
                     chol[p]);
    if (!grads) continue;

    const VectorXd mu_p = state.factors.mu.row(p).transpose();
    MatrixXd c_inv = chol[p].triangularView<Eigen::Lower>().solve(
        MatrixXd::Identity(gram.k_z.rows(), gram.k_z.cols()));
    c_inv = chol[p].transpose().triangularView<Eigen::Upper>().solve(c_inv);
    // beta_i = (K_Z + Sigma_p)^{-1} k(Z, x_i) for the whole batch
    const MatrixXd b_p = c_inv * cross.k_xz.transpose();  // M x |B|

    grads->mu.row(p) += (cross.k_xz.transpose() * am.col(p)).transpose();
    grads->mu.row(p) -= (gram.k_z * mu_p).transpose();

    g_x += am.col(p) * mu_p.transpose();
    g_x -= 2.0 * (b_p * as.col(p).asDiagonal()).transpose();

    const MatrixXd ckc = c_inv * gram.k_z * c_inv;
    g_k.noalias() += b_p * as.col(p).asDiagonal() * b_p.transpose();
    g_k.noalias() -= 0.5 * (mu_p * mu_p.transpose());
    g_k -= 0.5 * ckc;

    // d value / d sigma_j, then through sigma = exp(raw) + floor
    const VectorXd data_sigma =
        (b_p.array().square().matrix() * as.col(p)).eval();
    const VectorXd kl_sigma =
        0.5 * (ckc.diagonal() + c_inv.diagonal() -
               sigmas[p].cwiseInverse());
    grads->log_sigma.row(p) =
        ((data_sigma - kl_sigma).array() *
         state.factors.log_sigma.row(p).transpose().array().exp())
            .transpose();
  }

  if (grads) {
    MatrixXd g_q;  // d value / d (linear inducing gram Q)
    MatrixXd g_p;  // d value / d (linear cross product Xb Z^T)
    if (!state.kernel.is_se()) {
      g_q = std::move(g_k);
      g_p = std::move(g_x);
    } else {
      const double ell2 = state.kernel.lengthscale() * state.kernel.lengthscale();
      const double inv_two_ell2 = 1.0 / (2.0 * ell2);
      const MatrixXd w_z =
          (g_k.array() * gram.k_z.array() * (-inv_two_ell2)).matrix();
      const MatrixXd w_x =
          (g_x.array() * cross.k_xz.array() * (-inv_two_ell2)).matrix();
      g_q = -2.0 * w_z;
      g_q.diagonal() += 2.0 * (w_z.rowwise().sum());
      g_q.diagonal() += w_x.colwise().sum().transpose();
      g_p = -2.0 * w_x;

      grads->log_variance = (g_k.array() * gram.k_z.array()).sum() +
                            (g_x.array() * cross.k_xz.array()).sum() +
                            state.kernel.variance() * as.sum();
      const VectorXd dgz = gram.lin.diagonal();
      double d_ell = 0.0;
      for (Index j = 0; j < gram.k_z.cols(); ++j)
        for (Index i = 0; i < gram.k_z.rows(); ++i) {
          const double dz = std::max(dgz[i] + dgz[j] - 2.0 * gram.lin(i, j), 0.0);
          d_ell += g_k(i, j) * gram.k_z(i, j) * dz;
        }
      for (Index j = 0; j < cross.k_xz.cols(); ++j)
        for (Index i = 0; i < cross.k_xz.rows(); ++i) {
          const double dz = std::max(
              cross.x_sqnorm[i] + dgz[j] - 2.0 * cross.lin(i, j), 0.0);
          d_ell += g_x(i, j) * cross.k_xz(i, j) * dz;
        }
      grads->log_lengthscale = d_ell / ell2;
    }

    if (state.rep.is_subspace()) {
      grads->rep.noalias() =
          2.0 * (g_q * state.rep.coeffs * basis->gram_tilde);
      grads->rep.noalias() += g_p.transpose() * cross.basis_prod;
    } else {
      grads->rep.noalias() = 2.0 * (g_q * state.rep.coeffs);
      grads->rep += batch.features.left_multiply(g_p.transpose());
    }

    if (!grads->all_finite())
      throw NumericError("bound: non-finite gradient entries");
  }

  if (!std::isfinite(value)) throw NumericError("bound: non-finite value");
  return value;
}

}  // namespace

double full_bound(const ModelState& state, const Dataset& data,
                  const Basis* basis, const QuadratureRule& rule) {
  const Minibatch batch = exhaustive_batch(data);
  return evaluate(state, batch, data.n_rows(), basis, rule, nullptr);
}

double stochastic_bound(const ModelState& state, const Minibatch& batch,
                        Index n_total, const Basis* basis,
                        const QuadratureRule& rule) {
  return evaluate(state, batch, n_total, basis, rule, nullptr);
}

BoundResult bound_gradient(const ModelState& state, const Minibatch& batch,
                           Index n_total, const Basis* basis,
                           const QuadratureRule& rule) {
  BoundResult result;
  result.value = evaluate(state, batch, n_total, basis, rule, &result.grads);
  return result;
}

namespace {

double rel_block_err(const MatrixXd& fd, const MatrixXd& an) {
  const double scale =
      std::max({fd.cwiseAbs().maxCoeff(), an.cwiseAbs().maxCoeff(), 1e-12});
  return (fd - an).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

std::string FiniteDiffReport::to_string() const {
  std::ostringstream os;
  for (const auto& b : blocks)
    os << b.name << " max_rel_err=" << b.max_rel_err << '\n';
  return os.str();
}

FiniteDiffReport finite_diff_check(const ModelState& state,
                                   const Minibatch& batch, Index n_total,
                                   const Basis* basis,
                                   const QuadratureRule& rule, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step <= 0");
  const GradientBundle an =
      bound_gradient(state, batch, n_total, basis, rule).grads;

  auto central = [&](ModelState& s, double* param) {
    const double saved = *param;
    *param = saved + step;
    const double up = stochastic_bound(s, batch, n_total, basis, rule);
    *param = saved - step;
    const double dn = stochastic_bound(s, batch, n_total, basis, rule);
    *param = saved;
    return (up - dn) / (2.0 * step);
  };

  ModelState probe = state;
  auto fd_matrix = [&](MatrixXd& block) {
    MatrixXd fd(block.rows(), block.cols());
    for (Index j = 0; j < block.cols(); ++j)
      for (Index i = 0; i < block.rows(); ++i)
        fd(i, j) = central(probe, &block(i, j));
    return fd;
  };

  FiniteDiffReport report;
  report.blocks.push_back(
      {state.rep.is_subspace() ? "a" : "z",
       rel_block_err(fd_matrix(probe.rep.coeffs), an.rep)});
  report.blocks.push_back({"mu", rel_block_err(fd_matrix(probe.factors.mu), an.mu)});
  report.blocks.push_back(
      {"log_sigma", rel_block_err(fd_matrix(probe.factors.log_sigma), an.log_sigma)});
  report.blocks.push_back({"phi", rel_block_err(fd_matrix(probe.phi), an.phi)});
  {
    MatrixXd fd(probe.bias.size(), 1);
    for (Index i = 0; i < probe.bias.size(); ++i)
      fd(i, 0) = central(probe, &probe.bias[i]);
    report.blocks.push_back({"bias", rel_block_err(fd, an.bias)});
  }
  if (state.kernel.is_se()) {
    const double fd_var = central(probe, &probe.kernel.log_variance);
    const double fd_ell = central(probe, &probe.kernel.log_lengthscale);
    report.blocks.push_back(
        {"log_variance",
         rel_block_err(MatrixXd::Constant(1, 1, fd_var),
                       MatrixXd::Constant(1, 1, an.log_variance))});
    report.blocks.push_back(
        {"log_lengthscale",
         rel_block_err(MatrixXd::Constant(1, 1, fd_ell),
                       MatrixXd::Constant(1, 1, an.log_lengthscale))});
  }
  return report;
}

}  // namespace mlgp
