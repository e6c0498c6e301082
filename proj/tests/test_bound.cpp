#include <doctest.h>

#include <Eigen/Dense>

#include "mlgp/bound.hpp"
#include "mlgp/synth.hpp"
#include "test_util.hpp"

using namespace mlgp;

namespace {

// ---------------------------------------------------------------------------
// Slow-path oracle: dense inverses, explicit per-term loops, generic-Gaussian
// KL.  Shares only the quadrature rule with the implementation under test.
// ---------------------------------------------------------------------------

MatrixXd kernel_direct(const MatrixXd& a, const MatrixXd& b,
                       const KernelSpec& spec) {
  MatrixXd out(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) {
      if (spec.is_se()) {
        const double d2 = (a.row(i) - b.row(j)).squaredNorm();
        out(i, j) = spec.variance() *
                    std::exp(-d2 / (2.0 * spec.lengthscale() *
                                    spec.lengthscale()));
      } else {
        out(i, j) = a.row(i).dot(b.row(j));
      }
    }
  return out;
}

double slow_bound(const ModelState& state, const Dataset& data,
                  const Basis* basis, const QuadratureRule& rule) {
  const MatrixXd z = state.rep.is_subspace()
                         ? MatrixXd(state.rep.coeffs * basis->x_tilde)
                         : state.rep.coeffs;
  const MatrixXd x = data.features.to_dense();
  const MatrixXd k_z = kernel_direct(z, z, state.kernel);
  const MatrixXd k_xz = kernel_direct(x, z, state.kernel);

  double value = 0.0;
  const Index p_total = state.dims.p;
  std::vector<MatrixXd> c_inv(p_total);
  for (Index p = 0; p < p_total; ++p) {
    MatrixXd c = k_z;
    c.diagonal() += state.factors.sigma_diag(p);
    c_inv[p] = c.inverse();
  }
  for (Index i = 0; i < data.n_rows(); ++i) {
    const VectorXd kx = k_xz.row(i).transpose();
    const double kxx = state.kernel.is_se()
                           ? state.kernel.variance()
                           : x.row(i).squaredNorm();
    VectorXd m(p_total), s(p_total);
    for (Index p = 0; p < p_total; ++p) {
      m[p] = kx.dot(state.factors.mu.row(p).transpose());
      s[p] = kxx - kx.dot(c_inv[p] * kx);
    }
    for (LabelIndex k = 0; k < data.n_labels; ++k) {
      const bool positive =
          std::binary_search(data.positive_labels[i].begin(),
                             data.positive_labels[i].end(), k);
      double mean = state.bias[k], var = 0.0;
      for (Index p = 0; p < p_total; ++p) {
        mean += state.phi(k, p) * m[p];
        var += state.phi(k, p) * state.phi(k, p) * std::max(s[p], 0.0);
      }
      value -= expected_log_logistic(positive ? 1 : -1, mean, var, rule).value;
    }
  }
  // generic Gaussian KL with explicit determinants
  const MatrixXd k_inv = k_z.inverse();
  for (Index p = 0; p < p_total; ++p) {
    const VectorXd sigma = state.factors.sigma_diag(p);
    const MatrixXd s_q =
        (k_inv + MatrixXd(sigma.cwiseInverse().asDiagonal())).inverse();
    const VectorXd m_q = k_z * state.factors.mu.row(p).transpose();
    const double kl =
        0.5 * ((k_inv * s_q).trace() + m_q.dot(k_inv * m_q) -
               static_cast<double>(k_z.rows()) +
               std::log(k_z.determinant()) - std::log(s_q.determinant()));
    value -= kl;
  }
  return value;
}

struct Instance {
  Dataset data;
  Basis basis;
  ModelState state;
};

Instance make_instance(Index n, Index d, Index k, Index m, Index p, Index r,
                       KernelSpec::Kind kind,
                       InducingRepresentation::Mode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Instance inst;
  inst.data = testutil::random_dataset(n, d, k, 0.6, 1.5, rng);
  inst.basis = build_basis(inst.data.features, r, true, seed);
  inst.state = testutil::random_state(inst.data, inst.basis, m, p, kind, mode,
                                      rng);
  return inst;
}

}  // namespace

TEST_SUITE("bound") {

TEST_CASE("single point, zero weights: bound = -ln 2 - KL") {
  std::mt19937_64 rng(1);
  Instance inst = make_instance(1, 3, 1, 1, 1, 1, KernelSpec::Kind::linear,
                                InducingRepresentation::Mode::subspace, 3);
  inst.state.phi.setZero();
  inst.state.bias.setZero();
  inst.state.factors.mu.setZero();
  const QuadratureRule rule = make_quadrature(20);
  const double bound = full_bound(inst.state, inst.data, &inst.basis, rule);

  const MatrixXd k_z =
      gram_inducing(inst.state.rep, inst.state.kernel, &inst.basis);
  const VectorXd sigma = inst.state.factors.sigma_diag(0);
  const double kl = kl_term(k_z, inst.state.factors.mu.row(0).transpose(),
                            sigma, stable_factorize(k_z, sigma));
  CHECK(bound == doctest::Approx(-std::log(2.0) - kl).epsilon(1e-12));
}

TEST_CASE("duplicating the data doubles the data term only") {
  Instance inst = make_instance(4, 3, 2, 2, 2, 2, KernelSpec::Kind::linear,
                                InducingRepresentation::Mode::subspace, 5);
  inst.basis.cross_gram.reset();  // doubled row ids have no cross-gram slice
  const QuadratureRule rule = make_quadrature(20);

  Dataset doubled = inst.data;
  const MatrixXd dense = inst.data.features.to_dense();
  MatrixXd stacked(2 * dense.rows(), dense.cols());
  stacked << dense, dense;
  doubled.features = SparseMatrix::from_dense(stacked);
  doubled.positive_labels.insert(doubled.positive_labels.end(),
                                 inst.data.positive_labels.begin(),
                                 inst.data.positive_labels.end());
  doubled.validate();

  double kl_sum = 0.0;
  const MatrixXd k_z =
      gram_inducing(inst.state.rep, inst.state.kernel, &inst.basis);
  for (Index p = 0; p < inst.state.dims.p; ++p) {
    const VectorXd sigma = inst.state.factors.sigma_diag(p);
    kl_sum += kl_term(k_z, inst.state.factors.mu.row(p).transpose(), sigma,
                      stable_factorize(k_z, sigma));
  }
  const double single = full_bound(inst.state, inst.data, &inst.basis, rule);
  ModelState state2 = inst.state;
  state2.dims.n = doubled.n_rows();
  const double twice = full_bound(state2, doubled, &inst.basis, rule);
  CHECK(twice + kl_sum ==
        doctest::Approx(2.0 * (single + kl_sum)).epsilon(1e-10));
}

TEST_CASE("full bound equals the slow direct implementation") {
  // M <= R keeps K_Z full rank so the oracle may invert it explicitly
  for (auto kind :
       {KernelSpec::Kind::linear, KernelSpec::Kind::squared_exponential}) {
    for (auto mode : {InducingRepresentation::Mode::subspace,
                      InducingRepresentation::Mode::free_z}) {
      Instance inst = make_instance(6, 5, 3, 3, 2, 3, kind, mode, 11);
      const QuadratureRule rule = make_quadrature(20);
      const double fast = full_bound(
          inst.state, inst.data,
          inst.state.rep.is_subspace() ? &inst.basis : nullptr, rule);
      const double slow = slow_bound(inst.state, inst.data, &inst.basis, rule);
      CHECK(fast ==
            doctest::Approx(slow).epsilon(1e-10).scale(1.0 + std::abs(slow)));
    }
  }
}

TEST_CASE("exhaustive batch reproduces the full bound") {
  Instance inst = make_instance(5, 4, 3, 3, 2, 2, KernelSpec::Kind::linear,
                                InducingRepresentation::Mode::subspace, 7);
  const QuadratureRule rule = make_quadrature(20);
  const double full = full_bound(inst.state, inst.data, &inst.basis, rule);
  const double stoch = stochastic_bound(inst.state, exhaustive_batch(inst.data),
                                        inst.data.n_rows(), &inst.basis, rule);
  CHECK(std::abs(full - stoch) <= 1e-12 * std::abs(full));
}

TEST_CASE("negative subsampling carries the |N|/|L| weight") {
  // one instance, K=6, one positive -> |N| = 5; a single sampled negative
  // must enter with weight 5
  std::mt19937_64 rng(2);
  Dataset data = testutil::random_dataset(1, 3, 6, 1.0, 0.0, rng);
  data.positive_labels[0] = {0};
  Instance inst;
  inst.data = data;
  inst.basis = build_basis(data.features, 1, true, 0);
  inst.state = testutil::random_state(data, inst.basis, 1, 1,
                                      KernelSpec::Kind::linear,
                                      InducingRepresentation::Mode::subspace,
                                      rng);
  const QuadratureRule rule = make_quadrature(20);

  Minibatch batch;
  batch.row_indices = {0};
  batch.features = data.features;
  batch.positives = {{0}};
  batch.negatives = {{3}};
  batch.negative_pop = {5};
  CHECK(batch.negative_weight(0) == 5.0);
  const double stoch =
      stochastic_bound(inst.state, batch, 1, &inst.basis, rule);

  // hand-built value from the marginals and the quadrature
  const MatrixXd k_z =
      gram_inducing(inst.state.rep, inst.state.kernel, &inst.basis);
  const MatrixXd cross = cross_gram(batch, inst.state.rep, inst.state.kernel,
                                    &inst.basis);
  const VectorXd sigma = inst.state.factors.sigma_diag(0);
  const MatrixXd l = stable_factorize(k_z, sigma);
  const LatentMarginals marg = latent_marginals(
      cross, prior_diag(batch.features, inst.state.kernel),
      inst.state.factors, {l});
  auto term = [&](LabelIndex k, int y) {
    const auto um = utility_marginal(inst.state.phi.row(k).transpose(),
                                     inst.state.bias[k],
                                     marg.m.row(0).transpose(),
                                     marg.s.row(0).transpose());
    return expected_log_logistic(y, um.mean, um.var, rule).value;
  };
  const double expected =
      -(term(0, 1) + 5.0 * term(3, -1)) -
      kl_term(k_z, inst.state.factors.mu.row(0).transpose(), sigma, l);
  CHECK(stoch == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("averaging over every sampling configuration is unbiased") {
  // N=3, K=3: enumerate all minibatches of size 2 and all single-negative
  // choices; the mean of the estimator must equal the full bound
  Instance inst = make_instance(3, 3, 3, 2, 2, 2, KernelSpec::Kind::linear,
                                InducingRepresentation::Mode::subspace, 13);
  const QuadratureRule rule = make_quadrature(20);
  const double full = full_bound(inst.state, inst.data, &inst.basis, rule);

  // two-stage average: uniform over row subsets, and uniform over negative
  // choices within a subset (combo counts differ across subsets)
  const std::vector<std::vector<Index>> subsets = {{0, 1}, {0, 2}, {1, 2}};
  double mean = 0.0;
  for (const auto& rows : subsets) {
    double subset_sum = 0.0;
    Index configs = 0;
    // all combinations of one negative per batch row
    std::vector<std::vector<LabelIndex>> neg_options;
    for (Index r : rows) {
      std::vector<LabelIndex> negs;
      for (LabelIndex k = 0; k < 3; ++k)
        if (!std::binary_search(inst.data.positive_labels[r].begin(),
                                inst.data.positive_labels[r].end(), k))
          negs.push_back(k);
      neg_options.push_back(negs);
    }
    std::vector<std::size_t> pick(rows.size(), 0);
    while (true) {
      Minibatch batch;
      batch.row_indices = rows;
      batch.features = inst.data.features.select_rows(rows);
      for (std::size_t t = 0; t < rows.size(); ++t) {
        batch.positives.push_back(inst.data.positive_labels[rows[t]]);
        if (neg_options[t].empty()) {
          batch.negatives.push_back({});
          batch.negative_pop.push_back(0);
        } else {
          batch.negatives.push_back({neg_options[t][pick[t]]});
          batch.negative_pop.push_back(
              static_cast<Index>(neg_options[t].size()));
        }
      }
      subset_sum += stochastic_bound(inst.state, batch, 3, &inst.basis, rule);
      ++configs;
      // odometer over the negative choices
      std::size_t t = 0;
      for (; t < pick.size(); ++t) {
        if (++pick[t] < std::max<std::size_t>(neg_options[t].size(), 1)) break;
        pick[t] = 0;
      }
      if (t == pick.size()) break;
    }
    mean += subset_sum / static_cast<double>(configs);
  }
  mean /= static_cast<double>(subsets.size());
  CHECK(mean == doctest::Approx(full).epsilon(1e-10).scale(1.0 + std::abs(full)));
}

TEST_CASE("empty batch leaves exactly the KL gradient") {
  Instance inst = make_instance(4, 3, 2, 3, 2, 2, KernelSpec::Kind::linear,
                                InducingRepresentation::Mode::subspace, 17);
  Minibatch empty;
  empty.features.n_cols = inst.data.n_features();
  const QuadratureRule rule = make_quadrature(20);
  const BoundResult res =
      bound_gradient(inst.state, empty, inst.data.n_rows(), &inst.basis, rule);
  const MatrixXd k_z =
      gram_inducing(inst.state.rep, inst.state.kernel, &inst.basis);
  for (Index p = 0; p < inst.state.dims.p; ++p) {
    const VectorXd expected =
        -(k_z * inst.state.factors.mu.row(p).transpose());
    CHECK((res.grads.mu.row(p).transpose() - expected).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("bias gradient at zero variance is the logistic slope") {
  std::mt19937_64 rng(23);
  Dataset data = testutil::random_dataset(1, 2, 1, 1.0, 0.0, rng);
  data.positive_labels[0] = {0};  // single positive label
  const Basis basis = build_basis(data.features, 1, true, 0);
  ModelState state = testutil::random_state(
      data, basis, 1, 1, KernelSpec::Kind::linear,
      InducingRepresentation::Mode::subspace, rng);
  state.phi.setZero();  // utility variance is exactly zero
  state.bias[0] = 0.3;
  const QuadratureRule rule = make_quadrature(20);
  const BoundResult res = bound_gradient(state, exhaustive_batch(data), 1,
                                         &basis, rule);
  const double sigmoid = 1.0 / (1.0 + std::exp(0.3));
  CHECK(res.grads.bias[0] == doctest::Approx(sigmoid).epsilon(1e-8));
}

TEST_CASE("gradients match central finite differences") {
  const QuadratureRule rule = make_quadrature(20);
  for (auto kind :
       {KernelSpec::Kind::linear, KernelSpec::Kind::squared_exponential}) {
    Instance inst = make_instance(8, 5, 3, 3, 2, 3, kind,
                                  kind == KernelSpec::Kind::linear
                                      ? InducingRepresentation::Mode::subspace
                                      : InducingRepresentation::Mode::free_z,
                                  29);
    std::mt19937_64 rng(31);
    const Minibatch batch = sample_minibatch(inst.data, 5, 2, rng);
    const FiniteDiffReport report = finite_diff_check(
        inst.state, batch, inst.data.n_rows(),
        inst.state.rep.is_subspace() ? &inst.basis : nullptr, rule, 1e-5);
    for (const auto& block : report.blocks) {
      CAPTURE(block.name);
      CHECK(block.max_rel_err < 1e-4);
    }
  }
}

TEST_CASE("a corrupted gradient block is flagged above 1e-2") {
  Instance inst = make_instance(6, 4, 3, 3, 2, 2, KernelSpec::Kind::linear,
                                InducingRepresentation::Mode::subspace, 37);
  const QuadratureRule rule = make_quadrature(20);
  const Minibatch batch = exhaustive_batch(inst.data);
  BoundResult res = bound_gradient(inst.state, batch, inst.data.n_rows(),
                                   &inst.basis, rule);
  MatrixXd corrupted = res.grads.phi * 1.1;

  // central differences recomputed here, then compared against the corrupted
  // block with the same max-relative metric the report uses
  const double h = 1e-5;
  MatrixXd fd(corrupted.rows(), corrupted.cols());
  ModelState probe = inst.state;
  for (Index j = 0; j < corrupted.cols(); ++j)
    for (Index i = 0; i < corrupted.rows(); ++i) {
      const double saved = probe.phi(i, j);
      probe.phi(i, j) = saved + h;
      const double up = stochastic_bound(probe, batch, inst.data.n_rows(),
                                         &inst.basis, rule);
      probe.phi(i, j) = saved - h;
      const double dn = stochastic_bound(probe, batch, inst.data.n_rows(),
                                         &inst.basis, rule);
      probe.phi(i, j) = saved;
      fd(i, j) = (up - dn) / (2.0 * h);
    }
  const double clean =
      (fd - res.grads.phi).cwiseAbs().maxCoeff() /
      std::max(fd.cwiseAbs().maxCoeff(), res.grads.phi.cwiseAbs().maxCoeff());
  const double flagged =
      (fd - corrupted).cwiseAbs().maxCoeff() /
      std::max(fd.cwiseAbs().maxCoeff(), corrupted.cwiseAbs().maxCoeff());
  CHECK(clean < 1e-4);
  CHECK(flagged > 1e-2);
}

TEST_CASE("zero-parameter state: bias gradient reflects label imbalance") {
  std::mt19937_64 rng(41);
  Dataset data = testutil::random_dataset(6, 3, 2, 0.8, 1.0, rng);
  data.positive_labels = {{0}, {0}, {0}, {0}, {}, {}};  // label 0 common
  const Basis basis = build_basis(data.features, 2, true, 0);
  ModelState state = testutil::random_state(
      data, basis, 2, 1, KernelSpec::Kind::linear,
      InducingRepresentation::Mode::subspace, rng);
  state.phi.setZero();
  state.bias.setZero();
  state.factors.mu.setZero();
  const QuadratureRule rule = make_quadrature(20);
  const BoundResult res = bound_gradient(state, exhaustive_batch(data),
                                         data.n_rows(), &basis, rule);
  CHECK(res.grads.all_finite());
  CHECK(res.grads.bias[0] > 0.0);   // 4 positives vs 2 negatives
  CHECK(res.grads.bias[1] < 0.0);   // all negative
  CHECK(res.grads.bias[0] == doctest::Approx(0.5 * (4 - 2)).epsilon(1e-12));
  CHECK(res.grads.bias[1] == doctest::Approx(0.5 * (0 - 6)).epsilon(1e-12));
}

TEST_CASE("subspace and free-Z modes agree when the basis spans R^D") {
  std::mt19937_64 rng(43);
  const Index d = 4;
  Dataset data = testutil::random_dataset(7, d, 3, 0.9, 1.5, rng);
  const Basis basis = build_basis(data.features, d, true, 1);
  for (auto kind :
       {KernelSpec::Kind::linear, KernelSpec::Kind::squared_exponential}) {
    ModelState sub = testutil::random_state(
        data, basis, 3, 2, kind, InducingRepresentation::Mode::subspace, rng);
    ModelState free = sub;
    free.rep = InducingRepresentation::free_rows(sub.rep.coeffs * basis.x_tilde);
    free.dims.r = 0;
    const QuadratureRule rule = make_quadrature(20);
    const double a = full_bound(sub, data, &basis, rule);
    const double b = full_bound(free, data, nullptr, rule);
    CHECK(std::abs(a - b) < 1e-10 * (1.0 + std::abs(a)));
  }
}

}  // TEST_SUITE
