#include "mlgp/archive.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace mlgp {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'G', 'P', 'A', 'R', 'C', '1'};

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("archive: truncated while reading " + what);
  return value;
}

}  // namespace

void Archive::put_matrix(const std::string& name, const MatrixXd& m) {
  Entry e;
  e.dtype = 0;
  e.dims = {static_cast<std::uint64_t>(m.rows()),
            static_cast<std::uint64_t>(m.cols())};
  e.payload.resize(sizeof(double) * m.size());
  // row-major payload, independent of Eigen's default storage order
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  std::memcpy(e.payload.data(), rm.data(), e.payload.size());
  entries_[name] = std::move(e);
}

void Archive::put_vector(const std::string& name, const VectorXd& v) {
  Entry e;
  e.dtype = 0;
  e.dims = {static_cast<std::uint64_t>(v.size())};
  e.payload.resize(sizeof(double) * v.size());
  std::memcpy(e.payload.data(), v.data(), e.payload.size());
  entries_[name] = std::move(e);
}

void Archive::put_scalar(const std::string& name, double x) {
  put_vector(name, VectorXd::Constant(1, x));
}

void Archive::put_ints(const std::string& name,
                       const std::vector<std::int64_t>& v) {
  Entry e;
  e.dtype = 1;
  e.dims = {static_cast<std::uint64_t>(v.size())};
  e.payload.resize(sizeof(std::int64_t) * v.size());
  std::memcpy(e.payload.data(), v.data(), e.payload.size());
  entries_[name] = std::move(e);
}

void Archive::put_int(const std::string& name, std::int64_t x) {
  put_ints(name, {x});
}

void Archive::put_bytes(const std::string& name, const std::string& bytes) {
  Entry e;
  e.dtype = 2;
  e.dims = {static_cast<std::uint64_t>(bytes.size())};
  e.payload.assign(bytes.begin(), bytes.end());
  entries_[name] = std::move(e);
}

bool Archive::has(const std::string& name) const {
  return entries_.count(name) > 0;
}

const Archive::Entry& Archive::find(const std::string& name,
                                    std::uint8_t dtype) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw IoError("archive: missing entry '" + name + "'");
  if (it->second.dtype != dtype)
    throw IoError("archive: entry '" + name + "' has unexpected dtype");
  return it->second;
}

MatrixXd Archive::get_matrix(const std::string& name) const {
  const Entry& e = find(name, 0);
  if (e.dims.size() != 2)
    throw IoError("archive: entry '" + name + "' is not a matrix");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
      static_cast<Index>(e.dims[0]), static_cast<Index>(e.dims[1]));
  std::memcpy(rm.data(), e.payload.data(), e.payload.size());
  return rm;
}

VectorXd Archive::get_vector(const std::string& name) const {
  const Entry& e = find(name, 0);
  if (e.dims.size() != 1)
    throw IoError("archive: entry '" + name + "' is not a vector");
  VectorXd v(static_cast<Index>(e.dims[0]));
  std::memcpy(v.data(), e.payload.data(), e.payload.size());
  return v;
}

double Archive::get_scalar(const std::string& name) const {
  VectorXd v = get_vector(name);
  if (v.size() != 1)
    throw IoError("archive: entry '" + name + "' is not a scalar");
  return v[0];
}

std::vector<std::int64_t> Archive::get_ints(const std::string& name) const {
  const Entry& e = find(name, 1);
  std::vector<std::int64_t> v(e.dims.empty() ? 0 : e.dims[0]);
  std::memcpy(v.data(), e.payload.data(), e.payload.size());
  return v;
}

std::int64_t Archive::get_int(const std::string& name) const {
  auto v = get_ints(name);
  if (v.size() != 1)
    throw IoError("archive: entry '" + name + "' is not a single int");
  return v[0];
}

std::string Archive::get_bytes(const std::string& name) const {
  const Entry& e = find(name, 2);
  return std::string(e.payload.begin(), e.payload.end());
}

void Archive::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("archive: cannot open '" + tmp + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod<std::uint64_t>(os, entries_.size());
    for (const auto& [name, e] : entries_) {
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_pod<std::uint8_t>(os, e.dtype);
      write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(e.dims.size()));
      for (std::uint64_t d : e.dims) write_pod<std::uint64_t>(os, d);
      os.write(reinterpret_cast<const char*>(e.payload.data()),
               static_cast<std::streamsize>(e.payload.size()));
    }
    if (!os) throw IoError("archive: write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("archive: cannot rename '" + tmp + "' to '" + path + "'");
}

Archive Archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("archive: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("archive: '" + path + "' is not a supported archive (bad magic)");
  Archive a;
  const auto n = read_pod<std::uint64_t>(is, "entry count");
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw IoError("archive: truncated while reading entry name");
    Entry e;
    e.dtype = read_pod<std::uint8_t>(is, "dtype");
    if (e.dtype > 2) throw IoError("archive: unknown dtype in '" + name + "'");
    const auto ndim = read_pod<std::uint8_t>(is, "ndim");
    std::uint64_t count = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      e.dims.push_back(read_pod<std::uint64_t>(is, "dims"));
      count *= e.dims.back();
    }
    const std::size_t elem = e.dtype == 2 ? 1 : 8;
    e.payload.resize(count * elem);
    is.read(reinterpret_cast<char*>(e.payload.data()),
            static_cast<std::streamsize>(e.payload.size()));
    if (!is) throw IoError("archive: truncated payload in '" + name + "'");
    a.entries_[name] = std::move(e);
  }
  return a;
}

}  // namespace mlgp
