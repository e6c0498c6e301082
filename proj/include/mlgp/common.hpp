#ifndef MLGP_COMMON_HPP
#define MLGP_COMMON_HPP

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace mlgp {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Malformed input files (dataset text format, archives).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// File-system level failures (missing file, truncation, version mismatch).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or failed factorizations; the message names the
// offending parameter block or matrix.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mlgp

#endif
