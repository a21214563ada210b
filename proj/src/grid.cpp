#include "cmf/grid.hpp"

#include "cmf/spectral.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cmf {
namespace {

bool power_of_two(int n) { return n > 0 && std::has_single_bit(static_cast<unsigned>(n)); }

void require_kind(const Grid& g, AxisKind kind, const char* what) {
  for (const auto& ax : g.axes)
    if (ax.kind != kind) throw std::invalid_argument(std::string(what) + ": axis kind mismatch");
}

}  // namespace

Axis FreeDomain::axis(int i) const {
  return Axis{AxisKind::periodic, points.at(i), -0.5 * extent.at(i), 0.5 * extent.at(i)};
}

void FreeDomain::validate() const {
  if (dim() < 1 || dim() > 2) throw std::invalid_argument("free dimension must be 1 or 2");
  if (static_cast<int>(extent.size()) != dim()) throw std::invalid_argument("free extent/points size mismatch");
  for (int i = 0; i < dim(); ++i) {
    if (!(extent[i] > 0.0)) throw std::invalid_argument("free extent must be positive");
    if (points[i] < 8 || !power_of_two(points[i]))
      throw std::invalid_argument("free point count must be a power of two >= 8");
  }
}

Axis ConfinedDomain::axis(int i) const {
  return Axis{AxisKind::dirichlet, points.at(i), lo.at(i), hi.at(i)};
}

void ConfinedDomain::validate() const {
  if (dim() < 1 || dim() > 2) throw std::invalid_argument("confined dimension must be 1 or 2");
  if (static_cast<int>(lo.size()) != dim() || static_cast<int>(hi.size()) != dim())
    throw std::invalid_argument("confined interval/points size mismatch");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("confinement eps must lie in (0, 1]");
  for (int i = 0; i < dim(); ++i) {
    if (!(lo[i] < 0.0 && 0.0 < hi[i])) throw std::invalid_argument("confined interval must contain 0 in its interior");
    if (points[i] < 2 || !power_of_two(points[i]))
      throw std::invalid_argument("confined point count must be a power of two >= 2");
  }
}

Index Grid::size() const {
  Index s = 1;
  for (const auto& ax : axes) s *= ax.n;
  return s;
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (const auto& ax : axes) v *= ax.spacing();
  return v;
}

std::vector<Index> Grid::shape() const {
  std::vector<Index> s;
  s.reserve(axes.size());
  for (const auto& ax : axes) s.push_back(ax.n);
  return s;
}

void Grid::unflatten(Index flat, std::span<int> idx) const {
  for (int a = rank() - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % axes[a].n);
    flat /= axes[a].n;
  }
}

Grid free_grid(const FreeDomain& d) {
  d.validate();
  Grid g;
  for (int i = 0; i < d.dim(); ++i) g.axes.push_back(d.axis(i));
  return g;
}

Grid confined_grid(const ConfinedDomain& d) {
  d.validate();
  Grid g;
  for (int i = 0; i < d.dim(); ++i) g.axes.push_back(d.axis(i));
  return g;
}

Grid product_grid(const FreeDomain& f, const ConfinedDomain& c) {
  Grid g = free_grid(f);
  for (const auto& ax : confined_grid(c).axes) g.axes.push_back(ax);
  return g;
}

GridFunction::GridFunction(Grid g) : grid(std::move(g)), values(Eigen::VectorXcd::Zero(grid.size())) {}

GridFunction::GridFunction(Grid g, Eigen::VectorXcd v, Space s)
    : grid(std::move(g)), values(std::move(v)), space(s) {
  if (values.size() != grid.size()) throw std::invalid_argument("GridFunction: value count does not match grid");
}

double GridFunction::norm() const {
  const double w = space == Space::position ? grid.cell_volume() : 1.0;
  return std::sqrt(w * values.squaredNorm());
}

GridFunction sample(const Grid& g, const std::function<cplx(std::span<const double>)>& fn) {
  GridFunction f(g);
  std::vector<int> idx(g.rank());
  std::vector<double> x(g.rank());
  for (Index p = 0; p < g.size(); ++p) {
    g.unflatten(p, idx);
    for (int a = 0; a < g.rank(); ++a) x[a] = g.axes[a].node(idx[a]);
    f.values(p) = fn(x);
  }
  return f;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": domain mismatch");
}

cplx inner_product(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f.grid, g.grid, "inner_product");
  if (f.space != g.space) throw std::invalid_argument("inner_product: representation mismatch");
  const double w = f.space == Space::position ? f.grid.cell_volume() : 1.0;
  return w * f.values.dot(g.values);
}

double boundary_magnitude(const GridFunction& f) {
  double worst = 0.0;
  std::vector<int> idx(f.grid.rank());
  for (Index p = 0; p < f.grid.size(); ++p) {
    f.grid.unflatten(p, idx);
    for (int a = 0; a < f.grid.rank(); ++a)
      if (f.grid.axes[a].kind == AxisKind::dirichlet && idx[a] == 0) worst = std::max(worst, std::abs(f.values(p)));
  }
  return worst;
}

namespace {

GridFunction apply_kinetic(const GridFunction& f, double eps) {
  if (f.space != Space::position) throw std::invalid_argument("kinetic: position-space input required");
  if (boundary_magnitude(f) > 1e-12) throw std::invalid_argument("kinetic: nonzero values on Dirichlet wall");
  GridFunction out = f;
  const auto shape = f.grid.shape();
  for (int a = 0; a < f.grid.rank(); ++a) {
    const Axis& ax = f.grid.axes[a];
    const double scale = ax.kind == AxisKind::dirichlet ? 1.0 / (eps * eps) : 1.0;
    AxisMultiplier m(ax, [](double k) { return cplx(k * k); });
    GridFunction part = f;
    m.apply(part.values.data(), shape, a);
    if (a == 0)
      out.values = scale * part.values;
    else
      out.values += scale * part.values;
  }
  if (f.grid.rank() == 0) out.values.setZero();
  return out;
}

}  // namespace

GridFunction laplacian_free(const GridFunction& f) {
  require_kind(f.grid, AxisKind::periodic, "laplacian_free");
  return apply_kinetic(f, 1.0);
}

GridFunction laplacian_confined(const GridFunction& f, double eps) {
  require_kind(f.grid, AxisKind::dirichlet, "laplacian_confined");
  return apply_kinetic(f, eps);
}

GridFunction kinetic(const GridFunction& f, double eps) { return apply_kinetic(f, eps); }

GridFunction to_spectral(const GridFunction& f) {
  if (f.space != Space::position) throw std::invalid_argument("to_spectral: already spectral");
  if (boundary_magnitude(f) > 1e-12) throw std::invalid_argument("to_spectral: nonzero values on Dirichlet wall");
  GridFunction out = f;
  out.space = Space::spectral;
  const auto shape = f.grid.shape();
  for (int a = 0; a < f.grid.rank(); ++a) {
    const Axis ax = f.grid.axes[a];
    const double h = ax.spacing(), L = ax.length();
    if (ax.kind == AxisKind::periodic) {
      const Eigen::ArrayXd k = axis_wavenumbers(ax);
      for_each_line(out.values.data(), shape, a, [&](Eigen::Ref<Eigen::VectorXcd> line) {
        fft_forward(line);
        for (Index m = 0; m < line.size(); ++m) line(m) *= h / std::sqrt(L) * std::polar(1.0, -k(m) * ax.lo);
      });
    } else {
      for_each_line(out.values.data(), shape, a, [&](Eigen::Ref<Eigen::VectorXcd> line) {
        dst1(line);
        line *= h * std::sqrt(2.0 / L);
      });
    }
  }
  return out;
}

GridFunction to_position(const GridFunction& f) {
  if (f.space != Space::spectral) throw std::invalid_argument("to_position: already in position space");
  GridFunction out = f;
  out.space = Space::position;
  const auto shape = f.grid.shape();
  for (int a = 0; a < f.grid.rank(); ++a) {
    const Axis ax = f.grid.axes[a];
    const double L = ax.length();
    if (ax.kind == AxisKind::periodic) {
      const Eigen::ArrayXd k = axis_wavenumbers(ax);
      const double n = ax.n;
      for_each_line(out.values.data(), shape, a, [&](Eigen::Ref<Eigen::VectorXcd> line) {
        for (Index m = 0; m < line.size(); ++m) line(m) *= std::polar(1.0, k(m) * ax.lo);
        fft_inverse(line);
        line *= n / std::sqrt(L);
      });
    } else {
      for_each_line(out.values.data(), shape, a, [&](Eigen::Ref<Eigen::VectorXcd> line) {
        dst1(line);
        line *= std::sqrt(2.0 / L);
      });
    }
  }
  return out;
}

}  // namespace cmf

namespace cmf {

Eigen::ArrayXd spectral_k2(const Grid& g) {
  std::vector<Eigen::ArrayXd> k(g.rank());
  for (int a = 0; a < g.rank(); ++a) {
    const Axis& ax = g.axes[a];
    if (ax.kind == AxisKind::periodic) {
      k[a] = axis_wavenumbers(ax);
    } else {
      k[a] = Eigen::ArrayXd::LinSpaced(ax.n, 0.0, ax.n - 1.0) * (std::numbers::pi / ax.length());
    }
  }
  Eigen::ArrayXd out(g.size());
  std::vector<int> idx(g.rank());
  for (Index p = 0; p < g.size(); ++p) {
    g.unflatten(p, idx);
    double s = 0.0;
    for (int a = 0; a < g.rank(); ++a) s += k[a](idx[a]) * k[a](idx[a]);
    out(p) = s;
  }
  return out;
}

double h2_norm(const GridFunction& f) {
  const GridFunction fh = f.space == Space::spectral ? f : to_spectral(f);
  const Eigen::ArrayXd w = (1.0 + spectral_k2(f.grid)).square();
  return std::sqrt((w * fh.values.array().abs2()).sum());
}

double laplacian_l2(const GridFunction& f) {
  const GridFunction fh = f.space == Space::spectral ? f : to_spectral(f);
  return std::sqrt((spectral_k2(f.grid).square() * fh.values.array().abs2()).sum());
}

}  // namespace cmf
