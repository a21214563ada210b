#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace cmf {

using cplx = std::complex<double>;
using Index = Eigen::Index;

enum class AxisKind { periodic, dirichlet };

// Uniform axis with n nodes lo + j*h, h = (hi - lo)/n. A periodic axis
// identifies hi with lo. A Dirichlet axis keeps node 0 on the wall at lo and
// omits the wall at hi, so only nodes 1..n-1 carry data.
struct Axis {
  AxisKind kind = AxisKind::periodic;
  int n = 0;
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  double spacing() const { return (hi - lo) / n; }
  double node(int j) const { return lo + j * spacing(); }
  bool operator==(const Axis&) const = default;
};

struct FreeDomain {
  std::vector<double> extent;  // box [-L/2, L/2) per axis
  std::vector<int> points;

  int dim() const { return static_cast<int>(points.size()); }
  Axis axis(int i) const;
  void validate() const;
};

struct ConfinedDomain {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> points;
  double eps = 1.0;

  int dim() const { return static_cast<int>(points.size()); }
  Axis axis(int i) const;
  void validate() const;
};

// Tensor-product grid, row-major with the last axis fastest.
struct Grid {
  std::vector<Axis> axes;

  int rank() const { return static_cast<int>(axes.size()); }
  Index size() const;
  double cell_volume() const;
  std::vector<Index> shape() const;
  // Multi-index of a flat position.
  void unflatten(Index flat, std::span<int> idx) const;
  bool operator==(const Grid&) const = default;
};

Grid free_grid(const FreeDomain& d);
Grid confined_grid(const ConfinedDomain& d);
// Free axes first, confined axes after.
Grid product_grid(const FreeDomain& f, const ConfinedDomain& c);

enum class Space { position, spectral };

struct GridFunction {
  Grid grid;
  Eigen::VectorXcd values;
  Space space = Space::position;

  GridFunction() = default;
  explicit GridFunction(Grid g);
  GridFunction(Grid g, Eigen::VectorXcd v, Space s = Space::position);

  double norm() const;
  double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

// Samples fn(coords) at every node; coords has one entry per axis.
GridFunction sample(const Grid& g, const std::function<cplx(std::span<const double>)>& fn);

cplx inner_product(const GridFunction& f, const GridFunction& g);

// -Delta on a grid made of periodic axes only.
GridFunction laplacian_free(const GridFunction& f);
// -eps^-2 Delta on a grid made of Dirichlet axes only. Boundary nodes must vanish.
GridFunction laplacian_confined(const GridFunction& f, double eps);
// -Delta_x - eps^-2 Delta_y on a mixed grid.
GridFunction kinetic(const GridFunction& f, double eps);

// Coefficients in the orthonormal Fourier / sine eigenbasis of each axis.
// Index 0 of a Dirichlet axis is unused and stays zero.
GridFunction to_spectral(const GridFunction& f);
GridFunction to_position(const GridFunction& f);

// |k|^2 of every spectral coefficient (same flat layout as to_spectral).
Eigen::ArrayXd spectral_k2(const Grid& g);
// (sum (1 + |k|^2)^2 |f^|^2)^{1/2} and ||Delta f||_2, both with the unscaled Laplacian.
double h2_norm(const GridFunction& f);
double laplacian_l2(const GridFunction& f);

// Largest |f| on Dirichlet wall nodes.
double boundary_magnitude(const GridFunction& f);

// Throws std::invalid_argument on mismatch.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace cmf
