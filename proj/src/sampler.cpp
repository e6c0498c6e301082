#include "mlgp/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace mlgp {

namespace {

// Uniform subset of size k from the negative set N_i = {0..K-1} \ P_i.
// Rejection sampling when k is small relative to |N_i|; otherwise the
// complement is materialized and partially shuffled.
std::vector<LabelIndex> sample_negatives(const std::vector<LabelIndex>& pos,
                                         Index n_labels, Index k,
                                         std::mt19937_64& rng) {
  const Index pop = n_labels - static_cast<Index>(pos.size());
  if (k >= pop) {
    std::vector<LabelIndex> all;
    all.reserve(pop);
    std::size_t t = 0;
    for (LabelIndex lab = 0; lab < n_labels; ++lab) {
      if (t < pos.size() && pos[t] == lab) {
        ++t;
        continue;
      }
      all.push_back(lab);
    }
    return all;
  }
  if (k * 3 >= pop) {
    std::vector<LabelIndex> all;
    all.reserve(pop);
    std::size_t t = 0;
    for (LabelIndex lab = 0; lab < n_labels; ++lab) {
      if (t < pos.size() && pos[t] == lab) {
        ++t;
        continue;
      }
      all.push_back(lab);
    }
    for (Index i = 0; i < k; ++i) {
      std::uniform_int_distribution<Index> pick(i, pop - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    all.resize(k);
    return all;
  }
  std::vector<LabelIndex> out;
  out.reserve(k);
  std::unordered_set<LabelIndex> seen;
  std::uniform_int_distribution<LabelIndex> pick(
      0, static_cast<LabelIndex>(n_labels - 1));
  while (static_cast<Index>(out.size()) < k) {
    const LabelIndex lab = pick(rng);
    if (std::binary_search(pos.begin(), pos.end(), lab)) continue;
    if (!seen.insert(lab).second) continue;
    out.push_back(lab);
  }
  return out;
}

}  // namespace

Minibatch make_minibatch(const Dataset& data, std::span<const Index> rows,
                         Index neg_size, std::mt19937_64& rng) {
  if (neg_size < 1) throw std::invalid_argument("sampler: neg_size must be >= 1");
  Minibatch batch;
  batch.row_indices.assign(rows.begin(), rows.end());
  batch.features = data.features.select_rows(rows);
  batch.positives.reserve(rows.size());
  batch.negatives.reserve(rows.size());
  batch.negative_pop.reserve(rows.size());
  for (Index r : rows) {
    const auto& pos = data.positive_labels[r];
    batch.positives.push_back(pos);
    batch.negative_pop.push_back(data.negative_count(r));
    batch.negatives.push_back(
        sample_negatives(pos, data.n_labels, neg_size, rng));
  }
  return batch;
}

Minibatch sample_minibatch(const Dataset& data, Index batch_size,
                           Index neg_size, std::mt19937_64& rng) {
  const Index n = data.n_rows();
  if (batch_size < 1 || batch_size > n)
    throw std::invalid_argument("sampler: batch_size must be in [1, N]");
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(batch_size);
  return make_minibatch(data, order, neg_size, rng);
}

Minibatch exhaustive_batch(const Dataset& data) {
  Minibatch batch;
  batch.row_indices.resize(data.n_rows());
  std::iota(batch.row_indices.begin(), batch.row_indices.end(), Index{0});
  batch.features = data.features;
  batch.positives = data.positive_labels;
  batch.negatives.reserve(data.n_rows());
  batch.negative_pop.reserve(data.n_rows());
  for (Index i = 0; i < data.n_rows(); ++i) {
    const auto& pos = data.positive_labels[i];
    std::vector<LabelIndex> neg;
    neg.reserve(data.negative_count(i));
    std::size_t t = 0;
    for (LabelIndex lab = 0; lab < data.n_labels; ++lab) {
      if (t < pos.size() && pos[t] == lab) {
        ++t;
        continue;
      }
      neg.push_back(lab);
    }
    batch.negative_pop.push_back(static_cast<Index>(neg.size()));
    batch.negatives.push_back(std::move(neg));
  }
  return batch;
}

EpochSampler::EpochSampler(const Dataset& data, Index batch_size,
                           Index neg_size, std::mt19937_64& rng)
    : data_(data), rng_(rng), batch_size_(batch_size), neg_size_(neg_size) {
  const Index n = data.n_rows();
  if (batch_size_ < 1 || batch_size_ > n)
    throw std::invalid_argument("sampler: batch_size must be in [1, N]");
  batches_per_epoch_ = (n + batch_size_ - 1) / batch_size_;
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), Index{0});
  cursor_ = n;  // force a shuffle on the first next()
}

Minibatch EpochSampler::next() {
  const Index n = data_.n_rows();
  if (cursor_ >= n) {
    // restart from the identity so the permutation is a function of the rng
    // state alone; checkpoints taken at epoch boundaries then resume exactly
    std::iota(order_.begin(), order_.end(), Index{0});
    for (Index i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<Index> pick(0, i);
      std::swap(order_[i], order_[pick(rng_)]);
    }
    cursor_ = 0;
  }
  const Index take = std::min(batch_size_, n - cursor_);
  std::span<const Index> rows(order_.data() + cursor_, take);
  cursor_ += take;
  return make_minibatch(data_, rows, neg_size_, rng_);
}

}  // namespace mlgp
