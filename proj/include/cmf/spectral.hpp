#pragma once

#include "cmf/grid.hpp"

#include <functional>
#include <span>

namespace cmf {

// Wavenumbers of the transform behind an axis: length n for a periodic axis,
// length 2n for the odd extension of a Dirichlet axis (period 2L).
Eigen::ArrayXd axis_wavenumbers(const Axis& ax);

// Even Fourier multiplier symbol(k) applied along one axis of a row-major tensor.
class AxisMultiplier {
 public:
  AxisMultiplier(const Axis& ax, const std::function<cplx(double)>& symbol);

  void apply(cplx* data, std::span<const Index> shape, int axis) const;
  void apply_line(cplx* line, Index stride) const;
  const Axis& axis() const { return axis_; }

 private:
  Axis axis_;
  Eigen::ArrayXcd mult_;
  // Short axes apply the multiplier as a dense n x n matrix over whole blocks.
  Eigen::MatrixXcd dense_;
};

// Applies fn(line) to every 1-D line along `axis`; fn sees a contiguous copy.
void for_each_line(cplx* data, std::span<const Index> shape, int axis,
                   const std::function<void(Eigen::Ref<Eigen::VectorXcd>)>& fn);

// In-place unscaled forward FFT and scaled inverse FFT on a contiguous vector.
void fft_forward(Eigen::Ref<Eigen::VectorXcd> v);
void fft_inverse(Eigen::Ref<Eigen::VectorXcd> v);

// Multi-dimensional FFT over every axis of a row-major tensor.
void fft_nd(cplx* data, std::span<const Index> shape, bool inverse);

// out_j = sum_{m=1}^{n-1} sin(pi m j / n) v_m for j = 0..n-1 (DST-I via odd extension).
void dst1(Eigen::Ref<Eigen::VectorXcd> v);

}  // namespace cmf
