#include "cmf/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace cmf {
namespace {

Eigen::FFT<double>& engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

Eigen::VectorXcd& scratch() {
  thread_local Eigen::VectorXcd buf;
  return buf;
}

void odd_extend(const cplx* line, Index stride, Index n, Eigen::VectorXcd& g) {
  g.resize(2 * n);
  g(0) = 0.0;
  g(n) = 0.0;
  for (Index j = 1; j < n; ++j) {
    g(j) = line[j * stride];
    g(2 * n - j) = -line[j * stride];
  }
}

constexpr Index kDenseAxisLimit = 32;
constexpr Index kBatchColumns = 512;

}  // namespace

void fft_forward(Eigen::Ref<Eigen::VectorXcd> v) {
  auto& tmp = scratch();
  tmp.resize(v.size());
  engine().fwd(tmp.data(), v.data(), v.size());
  v = tmp;
}

void fft_inverse(Eigen::Ref<Eigen::VectorXcd> v) {
  auto& tmp = scratch();
  tmp.resize(v.size());
  engine().inv(tmp.data(), v.data(), v.size());
  v = tmp;
}

void dst1(Eigen::Ref<Eigen::VectorXcd> v) {
  const Index n = v.size();
  Eigen::VectorXcd g;
  odd_extend(v.data(), 1, n, g);
  fft_forward(g);
  // FFT of the odd extension equals -2i * sum sin(.) v_m.
  for (Index j = 0; j < n; ++j) v(j) = cplx(0.0, 0.5) * g(j);
  v(0) = 0.0;
}

Eigen::ArrayXd axis_wavenumbers(const Axis& ax) {
  const Index m = ax.kind == AxisKind::periodic ? ax.n : 2 * ax.n;
  const double period = ax.kind == AxisKind::periodic ? ax.length() : 2.0 * ax.length();
  Eigen::ArrayXd k(m);
  for (Index j = 0; j < m; ++j) {
    const Index s = j <= m / 2 ? j : j - m;
    k(j) = 2.0 * std::numbers::pi * static_cast<double>(s) / period;
  }
  return k;
}

AxisMultiplier::AxisMultiplier(const Axis& ax, const std::function<cplx(double)>& symbol)
    : axis_(ax) {
  const Eigen::ArrayXd k = axis_wavenumbers(ax);
  mult_.resize(k.size());
  for (Index j = 0; j < k.size(); ++j) mult_(j) = symbol(k(j));
  if (ax.n <= kDenseAxisLimit) {
    dense_ = Eigen::MatrixXcd::Identity(ax.n, ax.n);
    for (Index c = 0; c < ax.n; ++c) apply_line(dense_.col(c).data(), 1);
  }
}

void AxisMultiplier::apply_line(cplx* line, Index stride) const {
  const Index n = axis_.n;
  Eigen::VectorXcd g;
  if (axis_.kind == AxisKind::periodic) {
    g.resize(n);
    for (Index j = 0; j < n; ++j) g(j) = line[j * stride];
    fft_forward(g);
    g.array() *= mult_;
    fft_inverse(g);
    for (Index j = 0; j < n; ++j) line[j * stride] = g(j);
  } else {
    odd_extend(line, stride, n, g);
    fft_forward(g);
    g.array() *= mult_;
    fft_inverse(g);
    line[0] = 0.0;
    for (Index j = 1; j < n; ++j) line[j * stride] = g(j);
  }
}

void AxisMultiplier::apply(cplx* data, std::span<const Index> shape, int axis) const {
  if (shape[axis] != axis_.n) throw std::invalid_argument("AxisMultiplier: axis length mismatch");
  Index outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= shape[a];
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const Index n = shape[axis];
  if (dense_.size() > 0) {
    using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (inner >= kBatchColumns) {
      // Column tiles keep the scratch small and cache resident.
      using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
      RowMat tmp(n, kBatchColumns);
      for (Index o = 0; o < outer; ++o)
        for (Index c0 = 0; c0 < inner; c0 += kBatchColumns) {
          const Index w = std::min(kBatchColumns, inner - c0);
          Strided X(data + o * n * inner + c0, n, w, Eigen::OuterStride<>(inner));
          tmp.leftCols(w).noalias() = dense_ * X;
          X = tmp.leftCols(w);
        }
      return;
    }
    // Short inner extent: gather several outer blocks side by side so each product is wide.
    const Index group = std::max<Index>(1, kBatchColumns / inner);
    RowMat buf(n, group * inner), tmp(n, group * inner);
    for (Index o0 = 0; o0 < outer; o0 += group) {
      const Index g = std::min(group, outer - o0);
      const Index cols = g * inner;
      for (Index b = 0; b < g; ++b)
        for (Index j = 0; j < n; ++j)
          std::copy_n(data + (o0 + b) * n * inner + j * inner, inner, buf.data() + j * buf.cols() + b * inner);
      tmp.leftCols(cols).noalias() = dense_ * buf.leftCols(cols);
      for (Index b = 0; b < g; ++b)
        for (Index j = 0; j < n; ++j)
          std::copy_n(tmp.data() + j * tmp.cols() + b * inner, inner, data + (o0 + b) * n * inner + j * inner);
    }
    return;
  }
  for (Index o = 0; o < outer; ++o) {
    cplx* block = data + o * n * inner;
    for (Index i = 0; i < inner; ++i) apply_line(block + i, inner);
  }
}

void for_each_line(cplx* data, std::span<const Index> shape, int axis,
                   const std::function<void(Eigen::Ref<Eigen::VectorXcd>)>& fn) {
  Index outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= shape[a];
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const Index n = shape[axis];
  Eigen::VectorXcd line(n);
  for (Index o = 0; o < outer; ++o) {
    cplx* block = data + o * n * inner;
    for (Index i = 0; i < inner; ++i) {
      for (Index j = 0; j < n; ++j) line(j) = block[i + j * inner];
      fn(line);
      for (Index j = 0; j < n; ++j) block[i + j * inner] = line(j);
    }
  }
}

void fft_nd(cplx* data, std::span<const Index> shape, bool inverse) {
  for (int a = 0; a < static_cast<int>(shape.size()); ++a)
    for_each_line(data, shape, a, [&](Eigen::Ref<Eigen::VectorXcd> line) {
      if (inverse)
        fft_inverse(line);
      else
        fft_forward(line);
    });
}

}  // namespace cmf
