#include "mlgp/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace mlgp {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;
// Switch-over variance between the plain Hermite sum and the panel scheme;
// both are accurate to ~1e-14 here, so the seam is smooth to round-off.
constexpr double kGaussHermiteMaxVar = 0.5;
// The remainder integrand log1p(exp(-t)) is below 1e-16 past t = 38.
constexpr double kPanelMax = 38.0;
constexpr double kPanelWidth = 2.0;

double softplus(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double normal_pdf(double t) { return std::exp(-0.5 * t * t) / kSqrt2Pi; }

double normal_cdf_neg(double t) {  // Phi(-t)
  return 0.5 * std::erfc(t / std::sqrt(2.0));
}

// Nodes/weights of a Gauss rule from the symmetric tridiagonal Jacobi matrix
// (Golub-Welsch): eigenvalues are the nodes, mu0 * first-component^2 the
// weights.
void golub_welsch(const VectorXd& off_diag, double mu0, VectorXd& nodes,
                  VectorXd& weights) {
  const Index n = off_diag.size() + 1;
  MatrixXd jacobi = MatrixXd::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = off_diag[i];
    jacobi(i + 1, i) = off_diag[i];
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(jacobi);
  if (es.info() != Eigen::Success)
    throw NumericError("quadrature: Jacobi eigendecomposition failed");
  nodes = es.eigenvalues();
  weights = mu0 * es.eigenvectors().row(0).array().square();
}

struct PanelRule {
  VectorXd nodes;    // in [0, kPanelMax]
  VectorXd weights;  // plain Legendre weights scaled to the panels
};

// Composite Gauss-Legendre rule over [0, kPanelMax], n points per panel.
PanelRule make_panel_rule(int order) {
  VectorXd off(order - 1);
  for (int k = 1; k < order; ++k)
    off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  VectorXd x, w;
  golub_welsch(off, 2.0, x, w);

  const int n_panels = static_cast<int>(std::ceil(kPanelMax / kPanelWidth));
  PanelRule rule;
  rule.nodes.resize(order * n_panels);
  rule.weights.resize(order * n_panels);
  for (int p = 0; p < n_panels; ++p) {
    const double a = p * kPanelWidth;
    const double b = std::min(kPanelMax, a + kPanelWidth);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (int j = 0; j < order; ++j) {
      rule.nodes[p * order + j] = mid + half * x[j];
      rule.weights[p * order + j] = half * w[j];
    }
  }
  return rule;
}

const PanelRule& panel_rule(int order) {
  static std::mutex mu;
  static std::map<int, PanelRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make_panel_rule(order)).first;
  return it->second;
}

// Plain Hermite sum; valid for var in (0, ~1].
LogisticExpectation hermite_path(double mean, double var,
                                 const QuadratureRule& rule) {
  const double sd = std::sqrt(var);
  double value = 0.0, d_mean = 0.0, d_scaled = 0.0;
  for (Index j = 0; j < rule.nodes.size(); ++j) {
    const double f = mean + sd * rule.nodes[j];
    const double w = rule.weights[j];
    const double slope = -sigmoid(-f);
    value += w * softplus(-f);
    d_mean += w * slope;
    d_scaled += w * slope * rule.nodes[j];
  }
  return {value, d_mean, d_scaled / (2.0 * sd)};
}

// Closed-form E[relu(-f)] plus panel quadrature of E[log1p(exp(-|f|))];
// valid for any var but used when the Hermite path loses accuracy.
LogisticExpectation panel_path(double mean, double var,
                               const QuadratureRule& rule) {
  const double sd = std::sqrt(var);
  const double t = mean / sd;
  double value = sd * normal_pdf(t) - mean * normal_cdf_neg(t);
  double d_mean = -normal_cdf_neg(t);
  double d_var = normal_pdf(t) / (2.0 * sd);

  const PanelRule& panels = panel_rule(rule.order);
  for (Index j = 0; j < panels.nodes.size(); ++j) {
    const double f = panels.nodes[j];
    const double b = std::log1p(std::exp(-f));
    const double w = panels.weights[j] * b;
    const double zp = (f - mean) / sd;  // density at +f
    const double zm = (f + mean) / sd;  // density at -f
    const double np = normal_pdf(zp) / sd;
    const double nm = normal_pdf(zm) / sd;
    value += w * (np + nm);
    d_mean += w * (np * zp / sd - nm * zm / sd);
    d_var += w * ((np * (zp * zp - 1.0) + nm * (zm * zm - 1.0)) / (2.0 * var));
  }
  return {value, d_mean, d_var};
}

}  // namespace

QuadratureRule make_quadrature(int order) {
  if (order < 1) throw std::invalid_argument("quadrature: order must be >= 1");
  QuadratureRule rule;
  rule.order = order;
  if (order == 1) {
    rule.nodes = VectorXd::Zero(1);
    rule.weights = VectorXd::Ones(1);
    return rule;
  }
  VectorXd off(order - 1);
  for (int k = 1; k < order; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
  golub_welsch(off, 1.0, rule.nodes, rule.weights);
  return rule;
}

LogisticExpectation expected_log_logistic(int y, double mean, double var,
                                          const QuadratureRule& rule) {
  if (y != 1 && y != -1)
    throw std::invalid_argument("expected_log_logistic: y must be +-1");
  if (var < 0.0)
    throw std::invalid_argument("expected_log_logistic: var must be >= 0");
  const double ym = y * mean;

  LogisticExpectation r;
  if (var < 1e-14) {
    // point-mass limit; d_var is the Gaussian-smoothing limit  E[g'']/2
    const double s = sigmoid(-ym);
    r = {softplus(-ym), -s, 0.5 * s * (1.0 - s)};
  } else if (var <= kGaussHermiteMaxVar) {
    r = hermite_path(ym, var, rule);
  } else {
    r = panel_path(ym, var, rule);
  }
  r.value = std::max(r.value, 0.0);
  r.d_mean *= y;
  return r;
}

}  // namespace mlgp
