#ifndef MLGP_DATASET_HPP
#define MLGP_DATASET_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mlgp/sparse.hpp"

namespace mlgp {

using LabelIndex = std::int32_t;

// Multi-label dataset: sparse features plus the per-instance sorted list of
// positive label indices.  The negative set of row i is implicit as the
// complement in {0..K-1}; K can be large so a dense +/-1 matrix is never
// materialized.
struct Dataset {
  SparseMatrix features;                               // N x D
  std::vector<std::vector<LabelIndex>> positive_labels;  // per-row, sorted
  Index n_labels{0};                                   // K

  Index n_rows() const { return features.n_rows; }
  Index n_features() const { return features.n_cols; }
  Index negative_count(Index row) const {
    return n_labels - static_cast<Index>(positive_labels[row].size());
  }
  double mean_positives_per_row() const;
  void validate() const;
};

// Extreme-classification text format:
//   header "N D K", then one line per instance:
//   "l1,l2,...  f:v f:v ..." with 0-based indices; the label list may be
//   empty (line starts with a space or directly with features).
// Malformed content raises ParseError naming the 1-based line number.
Dataset parse_xc_dataset(std::istream& in);
Dataset parse_xc_dataset(const std::string& text);

// Loads from a file path; a ".gz" suffix selects gzip decompression.
Dataset load_xc_dataset(const std::string& path);

void write_xc_dataset(const Dataset& data, std::ostream& out);
std::string format_xc_dataset(const Dataset& data);

}  // namespace mlgp

#endif
