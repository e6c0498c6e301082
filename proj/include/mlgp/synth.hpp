#ifndef MLGP_SYNTH_HPP
#define MLGP_SYNTH_HPP

#include "mlgp/dataset.hpp"
#include "mlgp/kernel.hpp"

namespace mlgp {

// Synthetic draws from the generative model itself: latent functions from
// the exact N-dimensional GP prior, utilities through a random loading
// matrix and bias, labels through the logistic link.  Desk scale only (dense
// N x N factorization).
struct SynthSpec {
  Index n{200};
  Index d{20};
  Index k{10};
  Index p_true{2};
  KernelSpec kernel;
  double phi_scale{1.0};
  double bias_min{-2.0};
  double bias_max{0.0};
  double density{0.2};  // mean fraction of non-zero features (Zipf per column)
  std::uint64_t seed{0};
  // When non-zero, the design matrix, loadings and bias stay pinned to
  // `seed` while the latent functions and labels are redrawn from this
  // value; lets callers collect fresh draws over a fixed design.
  std::uint64_t latent_seed{0};
};

struct SynthResult {
  Dataset data;
  MatrixXd utilities;  // N x K ground-truth utility scores
  MatrixXd latent;     // N x P_true latent function values
  MatrixXd phi_true;   // K x P_true
  VectorXd bias_true;  // K
};

SynthResult generate(const SynthSpec& spec);

}  // namespace mlgp

#endif
