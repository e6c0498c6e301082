#include "mlgp/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mlgp {

namespace {

std::string line_msg(Index line_no, const std::string& what) {
  return "dataset parse error (line " + std::to_string(line_no) + "): " + what;
}

std::int64_t parse_int(std::string_view tok, Index line_no, const char* what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(line_msg(line_no, std::string("bad ") + what + " '" +
                                           std::string(tok) + "'"));
  return v;
}

double parse_double(std::string_view tok, Index line_no) {
  // from_chars<double> is available with GCC>=11; keep strtod for clarity.
  std::string s(tok);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty() || !std::isfinite(v))
    throw ParseError(line_msg(line_no, "non-numeric value '" + s + "'"));
  return v;
}

std::string gunzip_file(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open '" + path + "'");
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, n);
  const bool ok = (n == 0);
  gzclose(f);
  if (!ok) throw IoError("gzip decompression failed for '" + path + "'");
  return out;
}

}  // namespace

double Dataset::mean_positives_per_row() const {
  if (n_rows() == 0) return 0.0;
  std::size_t total = 0;
  for (const auto& p : positive_labels) total += p.size();
  return static_cast<double>(total) / static_cast<double>(n_rows());
}

void Dataset::validate() const {
  features.validate();
  if (static_cast<Index>(positive_labels.size()) != n_rows())
    throw std::invalid_argument("dataset: label rows do not match feature rows");
  for (const auto& p : positive_labels) {
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p[t] < 0 || p[t] >= n_labels)
        throw std::invalid_argument("dataset: positive label out of range");
      if (t > 0 && p[t] <= p[t - 1])
        throw std::invalid_argument("dataset: positive labels must be sorted unique");
    }
  }
}

Dataset parse_xc_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input");
  Index line_no = 1;

  std::istringstream hdr(line);
  std::int64_t n = -1, d = -1, k = -1;
  if (!(hdr >> n >> d >> k) || n < 0 || d < 0 || k < 0)
    throw ParseError(line_msg(1, "malformed header, expected 'N D K'"));
  std::string extra;
  if (hdr >> extra)
    throw ParseError(line_msg(1, "malformed header, trailing content"));

  Dataset data;
  data.n_labels = k;
  data.features.n_rows = n;
  data.features.n_cols = d;
  data.features.row_offsets.assign(1, 0);
  data.positive_labels.reserve(n);

  std::vector<std::pair<std::int64_t, double>> feats;
  for (Index i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw ParseError(line_msg(line_no + 1, "unexpected end of input, header "
                                             "promised " + std::to_string(n) +
                                             " instances"));
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    // label list = leading span up to the first space, unless it already
    // contains ':' (feature token, meaning the label list is empty)
    std::size_t pos = 0;
    std::vector<LabelIndex> labels;
    const std::size_t first_space = line.find(' ');
    const std::string_view head =
        std::string_view(line).substr(0, first_space == std::string::npos
                                             ? line.size()
                                             : first_space);
    if (!head.empty() && head.find(':') == std::string_view::npos) {
      std::size_t start = 0;
      while (start <= head.size()) {
        std::size_t comma = head.find(',', start);
        std::string_view tok = head.substr(
            start, comma == std::string_view::npos ? head.size() - start
                                                   : comma - start);
        if (tok.empty())
          throw ParseError(line_msg(line_no, "empty label token"));
        const std::int64_t lab = parse_int(tok, line_no, "label index");
        if (lab < 0 || lab >= k)
          throw ParseError(line_msg(line_no, "label index " +
                                                 std::to_string(lab) +
                                                 " out of range [0, " +
                                                 std::to_string(k) + ")"));
        labels.push_back(static_cast<LabelIndex>(lab));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      pos = head.size();
    }
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
      throw ParseError(line_msg(line_no, "duplicate label index"));

    feats.clear();
    while (pos < line.size()) {
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos])))
        ++pos;
      if (pos >= line.size()) break;
      std::size_t end = line.find(' ', pos);
      if (end == std::string::npos) end = line.size();
      const std::string_view tok = std::string_view(line).substr(pos, end - pos);
      const std::size_t colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_msg(line_no, "expected 'index:value', got '" +
                                               std::string(tok) + "'"));
      const std::int64_t idx = parse_int(tok.substr(0, colon), line_no,
                                         "feature index");
      if (idx < 0 || idx >= d)
        throw ParseError(line_msg(line_no, "feature index " +
                                               std::to_string(idx) +
                                               " out of range [0, " +
                                               std::to_string(d) + ")"));
      const double val = parse_double(tok.substr(colon + 1), line_no);
      feats.emplace_back(idx, val);
      pos = end;
    }
    std::sort(feats.begin(), feats.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t t = 1; t < feats.size(); ++t)
      if (feats[t].first == feats[t - 1].first)
        throw ParseError(line_msg(line_no, "duplicate feature index " +
                                               std::to_string(feats[t].first)));
    for (const auto& [idx, val] : feats) {
      data.features.col_indices.push_back(idx);
      data.features.values.push_back(val);
    }
    data.features.row_offsets.push_back(
        static_cast<std::int64_t>(data.features.values.size()));
    data.positive_labels.push_back(std::move(labels));
  }
  data.validate();
  return data;
}

Dataset parse_xc_dataset(const std::string& text) {
  std::istringstream in(text);
  return parse_xc_dataset(in);
}

Dataset load_xc_dataset(const std::string& path) {
  if (path.size() > 3 && path.substr(path.size() - 3) == ".gz") {
    const std::string text = gunzip_file(path);
    return parse_xc_dataset(text);
  }
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_xc_dataset(in);
}

void write_xc_dataset(const Dataset& data, std::ostream& out) {
  out << data.n_rows() << ' ' << data.n_features() << ' ' << data.n_labels
      << '\n';
  std::ostringstream num;
  num.precision(17);
  for (Index i = 0; i < data.n_rows(); ++i) {
    const auto& labels = data.positive_labels[i];
    for (std::size_t t = 0; t < labels.size(); ++t) {
      if (t > 0) out << ',';
      out << labels[t];
    }
    const auto& f = data.features;
    for (std::int64_t t = f.row_offsets[i]; t < f.row_offsets[i + 1]; ++t) {
      num.str("");
      num << f.values[t];
      out << ' ' << f.col_indices[t] << ':' << num.str();
    }
    out << '\n';
  }
}

std::string format_xc_dataset(const Dataset& data) {
  std::ostringstream out;
  write_xc_dataset(data, out);
  return out.str();
}

}  // namespace mlgp
