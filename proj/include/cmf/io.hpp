#pragma once

#include "cmf/grid.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cmf {

// Binary snapshot: "MFL1", u32 version, u32 particle count, u32 flags
// (bit 0 = spectral), u32 axis count, per axis u32 kind and u32 points,
// then f64 eps, f64 time, per axis f64 lo and f64 hi, then the samples as
// interleaved f64 (re, im) in row-major order over particle 1..N.
struct Snapshot {
  Grid grid;  // one-particle grid
  int particles = 1;
  double eps = 1.0;
  double time = 0.0;
  Space space = Space::position;
  Eigen::VectorXcd values;
};

std::string encode_mfl1(const Snapshot& s);
Snapshot decode_mfl1(std::string_view bytes);
void write_mfl1(const std::filesystem::path& path, const Snapshot& s);
Snapshot read_mfl1(const std::filesystem::path& path);

// Writes to a sibling temporary and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Fixed-format CSV so reruns are byte-identical.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);
  void add_row(const std::vector<double>& row);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

std::string format_double(double v);

}  // namespace cmf
