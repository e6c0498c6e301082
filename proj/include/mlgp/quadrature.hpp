#ifndef MLGP_QUADRATURE_HPP
#define MLGP_QUADRATURE_HPP

#include "mlgp/common.hpp"

namespace mlgp {

// Gauss-Hermite rule normalized to the standard normal measure:
// E_{x~N(0,1)}[g(x)] ~= sum_j weights[j] * g(nodes[j]), sum of weights = 1.
struct QuadratureRule {
  int order{0};
  VectorXd nodes;
  VectorXd weights;
};

// Golub-Welsch on the Jacobi matrix of the (probabilists') Hermite
// polynomials; computed once at startup for the configured order.
QuadratureRule make_quadrature(int order);

struct LogisticExpectation {
  double value;   // E_{f~N(mean,var)}[log(1 + exp(-y f))], >= 0
  double d_mean;  // exact derivative of the computed value wrt mean
  double d_var;   // exact derivative of the computed value wrt var
};

// Expected Bernoulli-logit log-loss under a Gaussian utility, with the
// derivatives taken through the node sums so the value and its gradients
// stay mutually consistent for finite-difference checks.
//
// Small variances use the plain Hermite sum. Larger variances would lose the
// rule's spectral accuracy (the integrand's complex poles at +-i*pi end up
// close to the real axis relative to sigma), so there the rectified-Gaussian
// part E[relu(-yf)] is taken in closed form and the bounded remainder
// E[log1p(exp(-|f|))] is integrated on fixed Gauss-Legendre panels whose node
// count per panel equals the rule order.
LogisticExpectation expected_log_logistic(int y, double mean, double var,
                                          const QuadratureRule& rule);

}  // namespace mlgp

#endif
