#include "hcctc/harness/features.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace hcctc::harness {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

void write_features(const std::string& path, const Matrix<float>& features) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write feature file: " + path);
  os.write("HFEA", 4);
  put_u32(os, static_cast<std::uint32_t>(features.rows()));
  put_u32(os, static_cast<std::uint32_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.size(); ++i) put_u32(os, std::bit_cast<std::uint32_t>(features.data()[i]));
  if (!os) throw FormatError("write failed: " + path);
}

Matrix<float> read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open feature file: " + path);
  unsigned char header[12];
  if (!is.read(reinterpret_cast<char*>(header), 12) || std::memcmp(header, "HFEA", 4) != 0)
    throw FormatError("not an HFEA feature file: " + path);
  const std::uint32_t rows = get_u32(header + 4);
  const std::uint32_t cols = get_u32(header + 8);
  std::vector<unsigned char> payload(static_cast<std::size_t>(rows) * cols * 4);
  if (!is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size())))
    throw FormatError("truncated feature file: " + path);
  Matrix<float> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<float>(get_u32(payload.data() + 4 * i));
  return m;
}

void write_text_matrix(const std::string& path, const Matrix<double>& m) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw FormatError("cannot write matrix: " + path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) std::fprintf(f, c ? " %.9g" : "%.9g", m(r, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

Matrix<double> read_text_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open matrix: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!rows.empty() && row.size() != rows.front().size()) throw FormatError("ragged matrix in " + path);
    rows.push_back(std::move(row));
  }
  Matrix<double> m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

}  // namespace hcctc::harness
