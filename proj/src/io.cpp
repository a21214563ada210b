#include "cmf/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cmf {
namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s_[pos_ + b])) << (8 * b);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw std::runtime_error("MFL1: truncated input");
  }
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_mfl1(const Snapshot& s) {
  Index expected = 1;
  for (int p = 0; p < s.particles; ++p) expected *= s.grid.size();
  if (s.values.size() != expected) throw std::invalid_argument("MFL1: value count does not match descriptor");
  std::string out = "MFL1";
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(s.particles));
  put_u32(out, s.space == Space::spectral ? 1u : 0u);
  put_u32(out, static_cast<std::uint32_t>(s.grid.rank()));
  for (const auto& ax : s.grid.axes) {
    put_u32(out, ax.kind == AxisKind::periodic ? 0u : 1u);
    put_u32(out, static_cast<std::uint32_t>(ax.n));
  }
  put_f64(out, s.eps);
  put_f64(out, s.time);
  for (const auto& ax : s.grid.axes) {
    put_f64(out, ax.lo);
    put_f64(out, ax.hi);
  }
  out.reserve(out.size() + 16 * static_cast<std::size_t>(s.values.size()));
  for (Index i = 0; i < s.values.size(); ++i) {
    put_f64(out, s.values(i).real());
    put_f64(out, s.values(i).imag());
  }
  return out;
}

Snapshot decode_mfl1(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(4) != "MFL1") throw std::runtime_error("MFL1: bad magic");
  if (r.u32() != kVersion) throw std::runtime_error("MFL1: unsupported version");
  Snapshot s;
  s.particles = static_cast<int>(r.u32());
  s.space = (r.u32() & 1u) ? Space::spectral : Space::position;
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw std::runtime_error("MFL1: implausible axis count");
  s.grid.axes.resize(rank);
  for (auto& ax : s.grid.axes) {
    ax.kind = r.u32() == 0 ? AxisKind::periodic : AxisKind::dirichlet;
    ax.n = static_cast<int>(r.u32());
  }
  s.eps = r.f64();
  s.time = r.f64();
  for (auto& ax : s.grid.axes) {
    ax.lo = r.f64();
    ax.hi = r.f64();
  }
  Index count = 1;
  for (int p = 0; p < s.particles; ++p) count *= s.grid.size();
  s.values.resize(count);
  for (Index i = 0; i < count; ++i) {
    const double re = r.f64();
    const double im = r.f64();
    s.values(i) = cplx(re, im);
  }
  if (!r.done()) throw std::runtime_error("MFL1: trailing bytes");
  return s;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_mfl1(const std::filesystem::path& path, const Snapshot& s) { write_atomic(path, encode_mfl1(s)); }

Snapshot read_mfl1(const std::filesystem::path& path) { return decode_mfl1(read_file(path)); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void CsvTable::add_row(const std::vector<double>& row) {
  if (row.size() != columns_.size()) throw std::invalid_argument("CsvTable: row width mismatch");
  rows_.push_back(row);
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t c = 0; c < columns_.size(); ++c) out += (c ? "," : "") + columns_[c];
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_double(row[c]);
    out += '\n';
  }
  return out;
}

}  // namespace cmf
