#include "mlgp/predict.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace mlgp {

MatrixXd predict_utilities(const ModelState& state, const SparseMatrix& x_star,
                           const Basis* basis) {
  state.validate();
  const GramCache gram = compute_gram(state.rep, state.kernel, basis);
  const CrossCache cross =
      compute_cross(x_star, {}, state.rep, state.kernel, basis, gram);
  // m*_p = k(x*, Z) mu_p for all rows and processes at once
  const MatrixXd m_star = cross.k_xz * state.factors.mu.transpose();  // n x P
  MatrixXd scores = m_star * state.phi.transpose();                   // n x K
  scores.rowwise() += state.bias.transpose();
  if (!scores.allFinite())
    throw NumericError("predict: non-finite utility scores");
  return scores;
}

std::vector<Index> top_k_labels(const Eigen::Ref<const VectorXd>& scores,
                                Index k) {
  if (k < 1 || k > scores.size())
    throw std::invalid_argument("top_k_labels: need 1 <= k <= K");
  std::vector<Index> order(scores.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](Index a, Index b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;  // deterministic tie-break
                    });
  order.resize(k);
  return order;
}

double precision_at_k(const std::vector<LabelIndex>& positives,
                      const Eigen::Ref<const VectorXd>& scores, Index k) {
  const auto top = top_k_labels(scores, k);
  Index hits = 0;
  for (Index label : top)
    if (std::binary_search(positives.begin(), positives.end(),
                           static_cast<LabelIndex>(label)))
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::string EvaluationReport::to_string() const {
  std::ostringstream os;
  os << "n_test=" << n_test << '\n';
  for (std::size_t i = 0; i < ks.size(); ++i)
    os << "p_at_" << ks[i] << '=' << precision[i] << '\n';
  return os.str();
}

EvaluationReport evaluate(const ModelState& state, const Dataset& test,
                          const std::vector<Index>& ks, const Basis* basis) {
  if (test.n_labels != state.dims.k)
    throw std::invalid_argument("evaluate: label space mismatch");
  for (Index k : ks)
    if (k < 1 || k > test.n_labels)
      throw std::invalid_argument("evaluate: k out of range");

  const MatrixXd scores = predict_utilities(state, test.features, basis);
  EvaluationReport report;
  report.ks = ks;
  report.n_test = test.n_rows();
  report.precision.assign(ks.size(), 0.0);
  for (Index i = 0; i < test.n_rows(); ++i)
    for (std::size_t t = 0; t < ks.size(); ++t)
      report.precision[t] += precision_at_k(test.positive_labels[i],
                                            scores.row(i).transpose(), ks[t]);
  for (double& p : report.precision)
    p /= std::max<Index>(test.n_rows(), 1);
  return report;
}

}  // namespace mlgp
