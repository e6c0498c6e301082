#ifndef MLGP_TRAINER_HPP
#define MLGP_TRAINER_HPP

#include <functional>
#include <optional>

#include "mlgp/bound.hpp"

namespace mlgp {

struct TrainConfig {
  Index latents{2};       // P
  Index inducing{16};     // M
  Index rank{8};          // R (subspace mode)
  Index batch_size{64};
  Index neg_size{0};      // 0 selects min(K-1, 2000)
  Index epochs{10};
  double learning_rate{1e-2};
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_eps{1e-8};
  KernelSpec::Kind kernel{KernelSpec::Kind::linear};
  InducingRepresentation::Mode mode{InducingRepresentation::Mode::subspace};
  std::uint64_t seed{0};
  int quadrature_order{20};
  Index checkpoint_every{0};  // epochs between checkpoints; 0 = final only
  bool iid_sampling{false};   // default is epoch-wise shuffling
  int kmeans_iters{10};

  Index effective_neg_size(Index n_labels) const {
    if (neg_size > 0) return neg_size;
    return std::max<Index>(1, std::min<Index>(n_labels - 1, 2000));
  }
  void validate() const;
};

struct OptimizerMoments {
  GradientBundle first;
  GradientBundle second;
  std::int64_t step{0};
};

// Parameter initialization: A from k-means over U diag(S) (free mode
// materializes Z = A ~X once), mu = 0, raw log-sigma = 0, Phi ~ N(0, 1/P),
// b_k the clipped empirical label log-odds, and for the SE kernel unit
// variance plus a median-distance lengthscale.
ModelState init_state(const TrainConfig& config, const Dataset& data,
                      const Basis& basis, std::mt19937_64& rng);

// One Adam ascent step with bias correction.  A non-finite update leaves the
// state untouched and returns false.
bool adam_step(ModelState& state, const GradientBundle& grads,
               OptimizerMoments& moments, const TrainConfig& config);

struct TrainResult {
  ModelState state;
  std::vector<double> epoch_bound;  // per-epoch mean stochastic bound
};

struct StepRecord {
  Index epoch;
  Index step;
  double bound;
  double wall_seconds;
};
using StepLogger = std::function<void(const StepRecord&)>;

// Runs epochs * ceil(N / batch) Adam steps; deterministic given the seed.
// checkpoint_dir, when set, receives periodic checkpoints plus "final.ckpt";
// after repeated non-finite steps the run aborts with the last good
// checkpoint on disk.
TrainResult train(const TrainConfig& config, const Dataset& data,
                  const Basis& basis,
                  const std::optional<std::string>& checkpoint_dir = {},
                  const StepLogger& logger = {},
                  const std::string& resume_from = {});

struct Checkpoint {
  ModelState state;
  OptimizerMoments moments;
  Index epoch{0};
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const ModelState& state,
                     const OptimizerMoments& moments, Index epoch,
                     const std::string& rng_state);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mlgp

#endif
