#ifndef MLGP_PREDICT_HPP
#define MLGP_PREDICT_HPP

#include "mlgp/model.hpp"

namespace mlgp {

// Mean utility scores for test rows: fbar_k = sum_p phi_kp k(x*, Z) mu_p + b_k.
// Rankings use the delta/MAP approximation; predictive variances never enter.
// In subspace mode only x* ~X^T (and, for SE, the raw ||x*||^2) is needed, so
// test points outside span(~X) are handled exactly.
MatrixXd predict_utilities(const ModelState& state, const SparseMatrix& x_star,
                           const Basis* basis);

// Fraction of the k top-scored labels that are positive; ties broken toward
// the lower label index.
double precision_at_k(const std::vector<LabelIndex>& positives,
                      const Eigen::Ref<const VectorXd>& scores, Index k);

// Indices of the k highest scores, descending, lower index wins ties.
std::vector<Index> top_k_labels(const Eigen::Ref<const VectorXd>& scores,
                                Index k);

struct EvaluationReport {
  std::vector<Index> ks;
  std::vector<double> precision;  // mean P@k per requested k
  Index n_test{0};

  std::string to_string() const;  // key=value lines
};

EvaluationReport evaluate(const ModelState& state, const Dataset& test,
                          const std::vector<Index>& ks, const Basis* basis);

}  // namespace mlgp

#endif
