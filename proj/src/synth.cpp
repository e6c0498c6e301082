#include "mlgp/synth.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>

namespace mlgp {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  if (spec.n < 1 || spec.d < 1 || spec.k < 1 || spec.p_true < 1)
    throw std::invalid_argument("synth: counts must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Sparse design matrix with Zipf-decaying column frequencies, the shape of
  // the text-style data this model targets; the resulting singular spectrum
  // decays instead of being flat, matching how real feature matrices behave.
  // Mean density stays at spec.density.
  VectorXd freq(spec.d);
  for (Index j = 0; j < spec.d; ++j)
    freq[j] = std::pow(1.0 + static_cast<double>(j), -2.0);
  freq *= spec.density * static_cast<double>(spec.d) / freq.sum();
  freq = freq.cwiseMin(0.98);
  for (int it = 0; it < 12; ++it) {
    const double deficit =
        spec.density * static_cast<double>(spec.d) - freq.sum();
    if (deficit <= 1e-9) break;
    double free_mass = 0.0;
    for (Index j = 0; j < spec.d; ++j)
      if (freq[j] < 0.98)
        free_mass += std::pow(1.0 + static_cast<double>(j), -2.0);
    if (free_mass <= 0.0) break;
    for (Index j = 0; j < spec.d; ++j)
      if (freq[j] < 0.98)
        freq[j] = std::min(
            0.98, freq[j] + deficit *
                      std::pow(1.0 + static_cast<double>(j), -2.0) /
                      free_mass);
  }

  SparseMatrix x;
  x.n_rows = spec.n;
  x.n_cols = spec.d;
  x.row_offsets.assign(1, 0);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < spec.d; ++j) {
      if (unif(rng) < freq[j]) {
        x.col_indices.push_back(j);
        x.values.push_back(normal(rng));
      }
    }
    x.row_offsets.push_back(static_cast<std::int64_t>(x.values.size()));
  }

  // exact GP prior at the training inputs
  const MatrixXd xd = x.to_dense();
  MatrixXd k_x(spec.n, spec.n);
  const MatrixXd lin = xd * xd.transpose();
  if (spec.kernel.is_se()) {
    const double inv_two_ell2 =
        1.0 / (2.0 * spec.kernel.lengthscale() * spec.kernel.lengthscale());
    const double var = spec.kernel.variance();
    for (Index j = 0; j < spec.n; ++j)
      for (Index i = 0; i < spec.n; ++i) {
        const double dz =
            std::max(lin(i, i) + lin(j, j) - 2.0 * lin(i, j), 0.0);
        k_x(i, j) = var * std::exp(-dz * inv_two_ell2);
      }
  } else {
    k_x = lin;
  }

  double jitter = 1e-8;
  k_x.diagonal().array() += jitter;
  Eigen::LLT<MatrixXd> llt(k_x);
  if (llt.info() != Eigen::Success) {
    k_x.diagonal().array() += 10.0 * jitter - jitter;
    llt.compute(k_x);
    if (llt.info() != Eigen::Success)
      throw NumericError("synth: K_X factorization failed even with jitter");
  }
  const MatrixXd chol = llt.matrixL();

  SynthResult out;
  out.phi_true.resize(spec.k, spec.p_true);
  for (Index p = 0; p < spec.p_true; ++p)
    for (Index k = 0; k < spec.k; ++k)
      out.phi_true(k, p) = spec.phi_scale * normal(rng);
  out.bias_true.resize(spec.k);
  for (Index k = 0; k < spec.k; ++k)
    out.bias_true[k] =
        spec.bias_min + (spec.bias_max - spec.bias_min) * unif(rng);

  if (spec.latent_seed != 0) rng.seed(spec.latent_seed);
  out.latent.resize(spec.n, spec.p_true);
  VectorXd xi(spec.n);
  for (Index p = 0; p < spec.p_true; ++p) {
    for (Index i = 0; i < spec.n; ++i) xi[i] = normal(rng);
    out.latent.col(p) = chol * xi;
  }

  out.utilities = out.latent * out.phi_true.transpose();
  out.utilities.rowwise() += out.bias_true.transpose();

  out.data.features = std::move(x);
  out.data.n_labels = spec.k;
  out.data.positive_labels.resize(spec.n);
  for (Index i = 0; i < spec.n; ++i)
    for (Index k = 0; k < spec.k; ++k)
      if (unif(rng) < sigmoid(out.utilities(i, k)))
        out.data.positive_labels[i].push_back(static_cast<LabelIndex>(k));
  out.data.validate();
  return out;
}

}  // namespace mlgp
