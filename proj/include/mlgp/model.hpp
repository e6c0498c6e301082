#ifndef MLGP_MODEL_HPP
#define MLGP_MODEL_HPP

#include "mlgp/kernel.hpp"
#include "mlgp/variational.hpp"

namespace mlgp {

struct ModelDims {
  Index n{0};  // training instances
  Index d{0};  // input dimensionality
  Index k{0};  // labels
  Index m{0};  // inducing inputs
  Index p{0};  // latent processes
  Index r{0};  // subspace rank (0 in free mode)
};

// Every trainable parameter of the multi-label GP factor model: the inducing
// representation (A or Z, shared by all latent processes), the variational
// factors, the label loading matrix Phi, the bias vector and the kernel
// hyperparameters.
struct ModelState {
  InducingRepresentation rep;
  VariationalFactors factors;
  MatrixXd phi;   // K x P
  VectorXd bias;  // K
  KernelSpec kernel;
  ModelDims dims;

  void validate() const {
    const Index m = rep.m();
    if (factors.mu.rows() != dims.p || factors.mu.cols() != m ||
        factors.log_sigma.rows() != dims.p || factors.log_sigma.cols() != m)
      throw std::invalid_argument("model: variational factor shape mismatch");
    if (phi.rows() != dims.k || phi.cols() != dims.p ||
        bias.size() != dims.k || m != dims.m)
      throw std::invalid_argument("model: parameter shape mismatch");
    if (rep.is_subspace() ? rep.coeffs.cols() != dims.r
                          : rep.coeffs.cols() != dims.d)
      throw std::invalid_argument("model: inducing representation shape mismatch");
    if (!rep.coeffs.allFinite() || !factors.mu.allFinite() ||
        !factors.log_sigma.allFinite() || !phi.allFinite() ||
        !bias.allFinite())
      throw NumericError("model: non-finite parameter entries");
  }
};

// Structure-matched container for the partial derivatives of the bound.
struct GradientBundle {
  MatrixXd rep;        // matches ModelState::rep.coeffs
  MatrixXd mu;         // P x M
  MatrixXd log_sigma;  // P x M (chain rule through exp already applied)
  MatrixXd phi;        // K x P
  VectorXd bias;       // K
  double log_variance{0.0};
  double log_lengthscale{0.0};

  static GradientBundle zeros_like(const ModelState& state) {
    GradientBundle g;
    g.rep = MatrixXd::Zero(state.rep.coeffs.rows(), state.rep.coeffs.cols());
    g.mu = MatrixXd::Zero(state.factors.mu.rows(), state.factors.mu.cols());
    g.log_sigma = g.mu;
    g.phi = MatrixXd::Zero(state.phi.rows(), state.phi.cols());
    g.bias = VectorXd::Zero(state.bias.size());
    return g;
  }

  bool all_finite() const {
    return rep.allFinite() && mu.allFinite() && log_sigma.allFinite() &&
           phi.allFinite() && bias.allFinite() &&
           std::isfinite(log_variance) && std::isfinite(log_lengthscale);
  }
};

}  // namespace mlgp

#endif
