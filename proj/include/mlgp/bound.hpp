#ifndef MLGP_BOUND_HPP
#define MLGP_BOUND_HPP

#include <string>
#include <vector>

#include "mlgp/dataset.hpp"
#include "mlgp/model.hpp"
#include "mlgp/quadrature.hpp"
#include "mlgp/sampler.hpp"

namespace mlgp {

// Exact variational lower bound over all N*K label terms:
//   -sum_i sum_k E[log(1 + exp(-y_ik f_ik))] - sum_p KL[q(u_p) || p(u_p)].
double full_bound(const ModelState& state, const Dataset& data,
                  const Basis* basis, const QuadratureRule& rule);

// Unbiased minibatch estimator with exact positive enumeration and
// |N_i|/|L_i| reweighted negative subsampling.  With the exhaustive batch it
// reproduces full_bound exactly.
double stochastic_bound(const ModelState& state, const Minibatch& batch,
                        Index n_total, const Basis* basis,
                        const QuadratureRule& rule);

struct BoundResult {
  double value{0.0};
  GradientBundle grads;
};

// Value of the stochastic estimator together with its exact derivatives
// with respect to every trainable block, holding the sampled batch fixed.
// The chain rule runs through the quadrature partials (d_mean, d_var), the
// triangular solves behind s_p(i) and the KL terms; in subspace mode no
// D-sized object appears in the backward pass.
BoundResult bound_gradient(const ModelState& state, const Minibatch& batch,
                           Index n_total, const Basis* basis,
                           const QuadratureRule& rule);

struct FiniteDiffBlock {
  std::string name;
  double max_rel_err{0.0};
};

struct FiniteDiffReport {
  std::vector<FiniteDiffBlock> blocks;
  double worst() const {
    double w = 0.0;
    for (const auto& b : blocks) w = std::max(w, b.max_rel_err);
    return w;
  }
  std::string to_string() const;
};

// Central finite differences of the stochastic bound against the analytic
// gradient, reported per parameter block.  Deterministic given state and
// batch.
FiniteDiffReport finite_diff_check(const ModelState& state,
                                   const Minibatch& batch, Index n_total,
                                   const Basis* basis,
                                   const QuadratureRule& rule, double step);

}  // namespace mlgp

#endif
