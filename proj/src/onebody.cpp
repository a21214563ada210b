#include "cmf/onebody.hpp"

#include "cmf/errors.hpp"
#include "cmf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cmf {

using std::numbers::pi;

ConfinedMode chi_mode(const ConfinedDomain& d, int m) {
  const Grid g = confined_grid(d);
  if (m < 0) throw std::out_of_range("chi_mode: negative mode index");
  std::vector<std::vector<int>> tuples;
  if (d.dim() == 1) {
    for (int i = 0; i < d.points[0] - 1; ++i) tuples.push_back({i});
  } else {
    for (int i = 0; i < d.points[0] - 1; ++i)
      for (int j = 0; j < d.points[1] - 1; ++j) tuples.push_back({i, j});
  }
  auto energy = [&](const std::vector<int>& t) {
    double e = 0.0;
    for (int a = 0; a < d.dim(); ++a) e += std::pow(pi * (t[a] + 1) / (d.hi[a] - d.lo[a]), 2);
    return e;
  };
  std::stable_sort(tuples.begin(), tuples.end(),
                   [&](const auto& a, const auto& b) { return energy(a) < energy(b); });
  if (m >= static_cast<int>(tuples.size()))
    throw std::out_of_range("chi_mode: mode " + std::to_string(m) + " not resolved by the confined grid");

  ConfinedMode mode;
  mode.index = m;
  mode.axis_modes = tuples[m];
  mode.E = energy(mode.axis_modes);
  mode.eps = d.eps;
  mode.chi = sample(g, [&](std::span<const double> y) {
    double v = 1.0;
    for (int a = 0; a < d.dim(); ++a) {
      const double L = d.hi[a] - d.lo[a];
      v *= std::sqrt(2.0 / L) * std::sin(pi * (mode.axis_modes[a] + 1) * (y[a] - d.lo[a]) / L);
    }
    return cplx(v);
  });
  for (Index p = 0; p < g.size(); ++p) {
    std::vector<int> idx(g.rank());
    g.unflatten(p, idx);
    if (std::find(idx.begin(), idx.end(), 0) != idx.end()) mode.chi.values(p) = 0.0;
  }
  return mode;
}

double quartic_integral(const ConfinedMode& chi) {
  return chi.chi.grid.cell_volume() * chi.chi.values.array().abs2().square().sum();
}

double coupling_b(double w_integral, const ConfinedMode& chi0) { return w_integral * quartic_integral(chi0); }

double coupling_b(const InteractionProfile& w, const ConfinedMode& chi0, int dim) {
  if (w.kind == ProfileKind::coulomb) throw ConfigError("coupling b needs an integrable interaction (coulomb given)");
  return coupling_b(w.integral(dim), chi0);
}

HartreeKernel::HartreeKernel(const Grid& free, const std::function<double(std::span<const double>)>& w0, double reach,
                             ConvolutionMode mode)
    : free_(free), mode_(mode) {
  for (const auto& ax : free.axes) {
    if (ax.kind != AxisKind::periodic) throw std::invalid_argument("HartreeKernel: free grid expected");
    const double limit = mode == ConvolutionMode::periodic ? 0.5 * ax.length() : ax.length();
    if (reach > limit)
      throw GuardError("interaction support " + std::to_string(reach) + " exceeds the convolution box limit " +
                       std::to_string(limit) + "; enlarge the free extent");
  }
  const int factor = mode == ConvolutionMode::periodic ? 1 : 2;
  Grid kgrid;
  for (const auto& ax : free.axes) kgrid.axes.push_back(Axis{AxisKind::periodic, factor * ax.n, 0.0, factor * ax.length()});
  shape_ = kgrid.shape();
  kernel_hat_.resize(kgrid.size());
  std::vector<int> idx(kgrid.rank());
  std::vector<double> x(kgrid.rank());
  for (Index p = 0; p < kgrid.size(); ++p) {
    kgrid.unflatten(p, idx);
    for (int a = 0; a < kgrid.rank(); ++a) {
      const double h = free.axes[a].spacing();
      const int n = kgrid.axes[a].n;
      x[a] = mode == ConvolutionMode::periodic ? min_image(idx[a] * h, free.axes[a].length())
                                               : (idx[a] <= n / 2 ? idx[a] : idx[a] - n) * h;
    }
    kernel_hat_(p) = w0(x);
  }
  integral_ = free.cell_volume() * kernel_hat_.real().sum();
  fft_nd(kernel_hat_.data(), shape_, false);
  kernel_hat_ *= free.cell_volume();
}

Eigen::ArrayXd HartreeKernel::convolve(const Eigen::ArrayXd& density) const {
  if (density.size() != free_.size()) throw std::invalid_argument("HartreeKernel: density size mismatch");
  Eigen::VectorXcd buf = Eigen::VectorXcd::Zero(kernel_hat_.size());
  const int r = free_.rank();
  std::vector<int> idx(r);
  auto padded_index = [&](Index p) {
    free_.unflatten(p, idx);
    Index q = 0;
    for (int a = 0; a < r; ++a) q = q * shape_[a] + idx[a];
    return q;
  };
  for (Index p = 0; p < density.size(); ++p) buf(padded_index(p)) = density(p);
  fft_nd(buf.data(), shape_, false);
  buf.array() *= kernel_hat_.array();
  fft_nd(buf.data(), shape_, true);
  Eigen::ArrayXd out(density.size());
  for (Index p = 0; p < density.size(); ++p) out(p) = buf(padded_index(p)).real();
  return out;
}

HartreeKernel hartree_kernel(const InteractionProfile& w, const Grid& free, ConvolutionMode mode) {
  if (w.kind == ProfileKind::coulomb) throw ConfigError("coulomb interaction cannot be sampled on the grid");
  return HartreeKernel(
      free,
      [&](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return w(std::sqrt(r2));
      },
      w.reach(), mode);
}

GridFunction hartree_potential(const GridFunction& Phi, const HartreeKernel& k) {
  require_same_grid(Phi.grid, k.grid(), "hartree_potential");
  const Eigen::ArrayXd v = k.convolve(Phi.values.array().abs2());
  return GridFunction(Phi.grid, v.cast<cplx>().matrix());
}

EffectiveModel make_effective_model(const ModelSpec& spec, int mode_index, ConvolutionMode conv,
                                    std::optional<double> w_integral) {
  spec.validate();
  EffectiveModel m;
  m.regime = spec.regime;
  m.free = free_grid(spec.free);
  m.free_dim = spec.free.dim();
  m.eps = spec.eps();
  m.V = spec.V;
  m.mode = chi_mode(spec.confined, mode_index);
  if (spec.regime == Regime::hartree) {
    m.kernel = hartree_kernel(spec.w, m.free, conv);
  } else {
    if (mode_index != 0) throw ConfigError("nls regime requires the ground confined mode");
    m.b = w_integral ? coupling_b(*w_integral, m.mode) : coupling_b(spec.w, m.mode, spec.dim());
  }
  return m;
}

GridFunction OneBodyState::phi() const {
  const Grid g = [&] {
    Grid out = Phi.grid;
    for (const auto& ax : mode.chi.grid.axes) out.axes.push_back(ax);
    return out;
  }();
  GridFunction f(g);
  const Index nc = mode.chi.values.size();
  const cplx phase = std::polar(1.0, -mode.E_eps() * t);
  for (Index i = 0; i < Phi.values.size(); ++i)
    f.values.segment(i * nc, nc) = (phase * Phi.values(i)) * mode.chi.values;
  return f;
}

OneBodyState make_onebody_state(GridFunction Phi, ConfinedMode mode, double t) {
  if (std::abs(Phi.norm() - 1.0) > 1e-8) throw InvariantError("one-body state must be normalized");
  return OneBodyState{std::move(Phi), std::move(mode), t};
}

GridFunction gaussian_packet(const Grid& free, double sigma, std::span<const double> center,
                             std::span<const double> momentum) {
  auto f = sample(free, [&](std::span<const double> x) {
    double r2 = 0.0, phase = 0.0;
    for (int a = 0; a < free.rank(); ++a) {
      const double c = a < static_cast<int>(center.size()) ? center[a] : 0.0;
      const double k = a < static_cast<int>(momentum.size()) ? momentum[a] : 0.0;
      const double dx = min_image(x[a] - c, free.axes[a].length());
      r2 += dx * dx;
      phase += k * dx;
    }
    return std::polar(std::exp(-r2 / (4.0 * sigma * sigma)), phase);
  });
  f.values /= f.norm();
  return f;
}

Eigen::ArrayXd effective_potential(const GridFunction& Phi, const EffectiveModel& m, double t) {
  Eigen::ArrayXd v = sample_potential(m.V, m.free, m.free_dim, m.eps, t, true);
  if (m.regime == Regime::hartree)
    v += m.kernel->convolve(Phi.values.array().abs2());
  else
    v += m.b * Phi.values.array().abs2();
  return v;
}

long step_count(double T, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const double ratio = std::abs(T) / dt;
  const long n = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument("horizon is not an integer number of steps");
  return n;
}

Trajectory evolve_effective(const OneBodyState& s0, const EffectiveModel& m, double T, double dt, int stride) {
  require_same_grid(s0.Phi.grid, m.free, "evolve_effective");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  const long steps = step_count(T, dt);
  const double h = T < 0.0 ? -dt : dt;
  const auto shape = m.free.shape();
  std::vector<AxisMultiplier> half;
  for (const auto& ax : m.free.axes) half.emplace_back(ax, [h](double k) { return std::polar(1.0, -0.5 * h * k * k); });

  Trajectory traj;
  traj.states.push_back(s0);
  OneBodyState s = s0;
  for (long step = 1; step <= steps; ++step) {
    for (int a = 0; a < m.free.rank(); ++a) half[a].apply(s.Phi.values.data(), shape, a);
    const Eigen::ArrayXd v = effective_potential(s.Phi, m, s.t + 0.5 * h);
    const double worst = std::abs(h) * v.abs().maxCoeff();
    if (worst > pi)
      throw GuardError("potential phase increment " + std::to_string(worst) + " exceeds pi; reduce the time step");
    s.Phi.values.array() *= (cplx(0.0, -h) * v.cast<cplx>()).exp();
    for (int a = 0; a < m.free.rank(); ++a) half[a].apply(s.Phi.values.data(), shape, a);
    s.t = s0.t + step * h;
    if (step % stride == 0 || step == steps) traj.states.push_back(s);
  }
  return traj;
}

double effective_energy(const OneBodyState& s, const EffectiveModel& m) {
  const GridFunction& Phi = s.Phi;
  const double kin = inner_product(Phi, laplacian_free(Phi)).real();
  const Eigen::ArrayXd rho = Phi.values.array().abs2();
  const double cell = m.free.cell_volume();
  const Eigen::ArrayXd V = sample_potential(m.V, m.free, m.free_dim, m.eps, s.t, true);
  double nl = 0.0;
  if (m.regime == Regime::hartree)
    nl = 0.5 * cell * (m.kernel->convolve(rho) * rho).sum();
  else
    nl = 0.5 * m.b * cell * rho.square().sum();
  return kin + cell * (V * rho).sum() + nl + s.mode.E_eps();
}

SupNorms sup_norms(const OneBodyState& s) {
  SupNorms n;
  n.Phi_inf = s.Phi.sup_norm();
  n.phi_inf = n.Phi_inf * s.mode.sup_norm();
  n.phi_H2 = h2_norm(s.phi());
  n.lap_Phi_L2 = laplacian_l2(s.Phi);
  return n;
}

double density_laplacian_l2(const OneBodyState& s) {
  const Grid& fg = s.Phi.grid;
  const Grid& cg = s.mode.chi.grid;
  GridFunction rho(fg, s.Phi.values.array().abs2().cast<cplx>().matrix());
  const Eigen::ArrayXd lap_rho = -laplacian_free(rho).values.real().array();
  const Eigen::ArrayXd rho_x = rho.values.real().array();

  // Closed form of the confined density and its Laplacian.
  Eigen::ArrayXd rho_y(cg.size()), lap_y(cg.size());
  std::vector<int> idx(cg.rank());
  for (Index p = 0; p < cg.size(); ++p) {
    cg.unflatten(p, idx);
    std::vector<double> f(cg.rank()), f2(cg.rank());
    for (int a = 0; a < cg.rank(); ++a) {
      const Axis& ax = cg.axes[a];
      const double L = ax.length();
      const double kappa = pi * (s.mode.axis_modes[a] + 1) / L;
      const double u = ax.node(idx[a]) - ax.lo;
      f[a] = (2.0 / L) * std::pow(std::sin(kappa * u), 2);
      f2[a] = (2.0 / L) * 2.0 * kappa * kappa * std::cos(2.0 * kappa * u);
    }
    double prod = 1.0, lap = 0.0;
    for (int a = 0; a < cg.rank(); ++a) prod *= f[a];
    for (int a = 0; a < cg.rank(); ++a) {
      double term = f2[a];
      for (int b = 0; b < cg.rank(); ++b)
        if (b != a) term *= f[b];
      lap += term;
    }
    rho_y(p) = prod;
    lap_y(p) = lap;
  }
  // Quadrature over the full box including the wall row, where the density
  // vanishes but its Laplacian does not.
  double total = 0.0;
  for (Index i = 0; i < fg.size(); ++i)
    total += ((lap_rho(i) * rho_y + rho_x(i) * lap_y).square()).sum();
  return std::sqrt(total * fg.cell_volume() * cg.cell_volume());
}

}  // namespace cmf
