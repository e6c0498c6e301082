#ifndef MLGP_SAMPLER_HPP
#define MLGP_SAMPLER_HPP

#include <random>
#include <span>

#include "mlgp/dataset.hpp"

namespace mlgp {

// A sampled minibatch: row slice of the design matrix plus, per row, the
// exact positive label set and a subsampled negative set L_i together with
// the negative population size |N_i| used for the |N_i|/|L_i| reweighting.
struct Minibatch {
  std::vector<Index> row_indices;                      // B
  SparseMatrix features;                               // |B| x D row slice
  std::vector<std::vector<LabelIndex>> positives;      // P_i per batch row
  std::vector<std::vector<LabelIndex>> negatives;      // L_i per batch row
  std::vector<Index> negative_pop;                     // |N_i| per batch row

  Index size() const { return static_cast<Index>(row_indices.size()); }
  double negative_weight(Index b) const {
    return negatives[b].empty()
               ? 0.0
               : static_cast<double>(negative_pop[b]) /
                     static_cast<double>(negatives[b].size());
  }
};

// Builds the batch for a fixed row selection, sampling min(neg_size, |N_i|)
// negatives uniformly without replacement for every row.
Minibatch make_minibatch(const Dataset& data, std::span<const Index> rows,
                         Index neg_size, std::mt19937_64& rng);

// I.i.d. draw: batch rows uniform without replacement over the dataset.
Minibatch sample_minibatch(const Dataset& data, Index batch_size,
                           Index neg_size, std::mt19937_64& rng);

// All rows in order, L_i = N_i exactly; evaluating the stochastic estimator
// on this batch reproduces the full bound.
Minibatch exhaustive_batch(const Dataset& data);

// Epoch-wise traversal: reshuffles row order at every epoch boundary and
// hands out consecutive blocks, so each instance is visited once per epoch.
class EpochSampler {
 public:
  EpochSampler(const Dataset& data, Index batch_size, Index neg_size,
               std::mt19937_64& rng);

  Minibatch next();
  Index batches_per_epoch() const { return batches_per_epoch_; }

 private:
  const Dataset& data_;
  std::mt19937_64& rng_;
  Index batch_size_;
  Index neg_size_;
  Index batches_per_epoch_;
  Index cursor_{0};
  std::vector<Index> order_;
};

}  // namespace mlgp

#endif
