#ifndef MLGP_ARCHIVE_HPP
#define MLGP_ARCHIVE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mlgp/common.hpp"

namespace mlgp {

// Self-describing binary container of named, dimensioned arrays.  Used for
// basis files and training checkpoints.  Layout (little-endian):
//
//   bytes 0..7   magic "MLGPARC1"
//   u64          number of entries
//   per entry:   u32 name length, name bytes,
//                u8 dtype (0 = f64, 1 = i64, 2 = u8),
//                u8 ndim, u64 dims[ndim], payload (row-major for matrices)
//
// Writes go through a temp file plus rename so a crash never leaves a
// truncated archive in place of a good one.
class Archive {
 public:
  void put_matrix(const std::string& name, const MatrixXd& m);
  void put_vector(const std::string& name, const VectorXd& v);
  void put_scalar(const std::string& name, double x);
  void put_ints(const std::string& name, const std::vector<std::int64_t>& v);
  void put_int(const std::string& name, std::int64_t x);
  void put_bytes(const std::string& name, const std::string& bytes);

  bool has(const std::string& name) const;
  MatrixXd get_matrix(const std::string& name) const;
  VectorXd get_vector(const std::string& name) const;
  double get_scalar(const std::string& name) const;
  std::vector<std::int64_t> get_ints(const std::string& name) const;
  std::int64_t get_int(const std::string& name) const;
  std::string get_bytes(const std::string& name) const;

  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  struct Entry {
    std::uint8_t dtype{0};
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> payload;
  };
  const Entry& find(const std::string& name, std::uint8_t dtype) const;
  std::map<std::string, Entry> entries_;
};

}  // namespace mlgp

#endif
