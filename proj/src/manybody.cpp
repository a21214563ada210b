#include "cmf/manybody.hpp"

#include "cmf/errors.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace cmf {

PairKernel::PairKernel(const Grid& g, int free_dim,
                       const std::function<double(std::span<const double>, std::span<const double>)>& fn)
    : grid_(g), free_dim_(free_dim) {
  Index total = 1;
  for (int a = 0; a < g.rank(); ++a) {
    rel_shape_.push_back(a < free_dim ? g.axes[a].n : 2 * g.axes[a].n - 1);
    total *= rel_shape_.back();
  }
  values_.resize(total);
  std::vector<double> dx(free_dim), dy(g.rank() - free_dim);
  for (Index p = 0; p < total; ++p) {
    Index rem = p;
    for (int a = g.rank() - 1; a >= 0; --a) {
      const Index k = rem % rel_shape_[a];
      rem /= rel_shape_[a];
      const Axis& ax = g.axes[a];
      if (a < free_dim)
        dx[a] = min_image(static_cast<double>(k) * ax.spacing(), ax.length());
      else
        dy[a - free_dim] = static_cast<double>(k - (ax.n - 1)) * ax.spacing();
    }
    values_(p) = fn(dx, dy);
  }
}

Index PairKernel::offset_index(std::span<const int> ia, std::span<const int> ib) const {
  Index q = 0;
  for (int a = 0; a < grid_.rank(); ++a) {
    const int n = grid_.axes[a].n;
    const Index k = a < free_dim_ ? ((ia[a] - ib[a]) % n + n) % n : ia[a] - ib[a] + (n - 1);
    q = q * rel_shape_[a] + k;
  }
  return q;
}

double PairKernel::operator()(Index a, Index b) const {
  std::vector<int> ia(grid_.rank()), ib(grid_.rank());
  grid_.unflatten(a, ia);
  grid_.unflatten(b, ib);
  return values_(offset_index(ia, ib));
}

Eigen::MatrixXd PairKernel::table() const {
  const Index d = grid_.size();
  Eigen::MatrixXd t(d, d);
  std::vector<int> ia(grid_.rank()), ib(grid_.rank());
  for (Index a = 0; a < d; ++a) {
    grid_.unflatten(a, ia);
    for (Index b = 0; b < d; ++b) {
      grid_.unflatten(b, ib);
      t(a, b) = values_(offset_index(ia, ib));
    }
  }
  return t;
}

double PairKernel::integral() const { return grid_.cell_volume() * values_.sum(); }

PairKernel pair_interaction_values(const ModelSpec& spec) {
  spec.validate();
  const InteractionProfile& w = spec.w;
  if (w.kind == ProfileKind::coulomb) throw ConfigError("coulomb interaction cannot be sampled on the grid");
  const Grid g = spec.onebody_grid();
  const int df = spec.free.dim();
  const double eps = spec.eps();
  double scale = 1.0, factor = 1.0;
  if (spec.theta > 0.0) {
    const double a = spec.scaling_parameter();
    scale = std::pow(a, spec.theta);
    factor = std::pow(eps, spec.confined.dim()) * std::pow(a, -spec.dim() * spec.theta);
  }
  const double reach = scale * w.reach();
  for (int i = 0; i < df; ++i) {
    const Axis& ax = g.axes[i];
    if (spec.theta > 0.0 && reach < 3.0 * ax.spacing()) {
      const double needed = std::ceil(3.0 * ax.length() / reach);
      throw GuardError("scaled interaction support " + std::to_string(reach) + " spans fewer than 3 free grid cells; "
                       "use at least " + std::to_string(static_cast<long>(needed)) + " free points per axis");
    }
    if (reach > 0.5 * ax.length())
      throw GuardError("interaction support exceeds half the free box; enlarge the free extent");
  }
  return PairKernel(g, df, [&](std::span<const double> dx, std::span<const double> dy) {
    double r2 = 0.0;
    for (double v : dx) r2 += v * v;
    for (double v : dy) r2 += eps * eps * v * v;
    return factor * w(std::sqrt(r2) / scale);
  });
}

double pair_prefactor(const ModelSpec& spec) {
  if (spec.theta == 0.0) return spec.particles > 1 ? 1.0 / (spec.particles - 1) : 0.0;
  return 1.0 / spec.particles;
}

std::string prefactor_convention(const ModelSpec& spec) { return spec.theta == 0.0 ? "1/(N-1)" : "1/N"; }

ManyBodyModel make_manybody_model(const ModelSpec& spec) {
  ManyBodyModel m;
  m.grid = spec.onebody_grid();
  m.free_dim = spec.free.dim();
  m.eps = spec.eps();
  m.particles = spec.particles;
  m.V = spec.V;
  m.kernel = pair_interaction_values(spec);
  m.prefactor = pair_prefactor(spec);
  m.convention = prefactor_convention(spec);
  return m;
}

ManyBodyState product_state(const OneBodyState& s, int particles) {
  const GridFunction phi = s.phi();
  return ManyBodyState{phi.grid, tensor_power(nodal(phi), particles), s.t};
}

std::size_t manybody_memory_estimate(int particles, Index dim) {
  const auto elems = static_cast<std::size_t>(ipow(dim, particles));
  return elems * 64 + static_cast<std::size_t>(dim * dim) * 8;
}

void check_memory(int particles, Index dim, std::size_t cap_bytes) {
  const std::size_t need = manybody_memory_estimate(particles, dim);
  if (need > cap_bytes)
    throw GuardError("N=" + std::to_string(particles) + " on a one-body grid of " + std::to_string(dim) +
                     " points needs about " + std::to_string(need >> 20) + " MiB, above the cap of " +
                     std::to_string(cap_bytes >> 20) + " MiB; shrink the grid or raise memory_cap_bytes");
}

namespace {

// Residual over the transpositions (1 j), which generate the symmetric group.
double generator_residual(const Tensor& t) {
  double worst = 0.0;
  for (int j = 1; j < t.particles; ++j) worst = std::max(worst, swap_residual(t, 0, j));
  return worst;
}

// Sum over particles of a one-body array, broadcast to the tensor grid.
Eigen::ArrayXd particle_sum(const Eigen::ArrayXd& v, int particles) {
  const Index d = v.size();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(ipow(d, particles));
  for (int p = 0; p < particles; ++p) {
    const Index B = ipow(d, particles - p - 1), A = ipow(d, p);
    for (Index a = 0; a < A; ++a)
      for (Index k = 0; k < d; ++k) out.segment((a * d + k) * B, B) += v(k);
  }
  return out;
}

Eigen::ArrayXd pair_sum(const Eigen::MatrixXd& table, int particles) {
  const Index d = table.rows();
  const Index total = ipow(d, particles);
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(total);
  std::vector<Index> digit(particles, 0);
  for (Index p = 0; p < total; ++p) {
    double s = 0.0;
    for (int i = 0; i < particles; ++i)
      for (int j = i + 1; j < particles; ++j) s += table(digit[i], digit[j]);
    out(p) = s;
    for (int j = particles - 1; j >= 0; --j) {
      if (++digit[j] < d) break;
      digit[j] = 0;
    }
  }
  return out;
}

std::vector<AxisMultiplier> kinetic_propagator(const Grid& g, double eps, double tau) {
  std::vector<AxisMultiplier> out;
  for (const auto& ax : g.axes) {
    const double scale = ax.kind == AxisKind::dirichlet ? 1.0 / (eps * eps) : 1.0;
    out.emplace_back(ax, [=](double k) { return std::polar(1.0, -tau * scale * k * k); });
  }
  return out;
}

}  // namespace

Eigen::ArrayXd manybody_potential(const ManyBodyModel& m, double t) {
  Eigen::ArrayXd pot = m.prefactor * pair_sum(m.kernel.table(), m.particles);
  if (m.V.enabled) pot += particle_sum(sample_potential(m.V, m.grid, m.free_dim, m.eps, t, false), m.particles);
  return pot;
}

ManyBodyState evolve_manybody(const ManyBodyState& s0, const ManyBodyModel& m, double T, double dt,
                              const ManyBodyObserver& observe, const EvolveOptions& opt) {
  require_same_grid(s0.grid, m.grid, "evolve_manybody");
  if (s0.psi.particles != m.particles || s0.psi.dim != m.grid.size())
    throw std::invalid_argument("evolve_manybody: state does not match model");
  if (opt.stride < 1) throw std::invalid_argument("stride must be >= 1");
  check_memory(m.particles, m.grid.size(), opt.memory_cap);
  if (opt.require_symmetric && generator_residual(s0.psi) > 1e-9 * std::max(1.0, s0.psi.norm()))
    throw InvariantError("evolve_manybody: initial state is not permutation symmetric");

  const long steps = step_count(T, dt);
  const double h = T < 0.0 ? -dt : dt;
  const auto half = kinetic_propagator(m.grid, m.eps, 0.5 * h);
  const auto full = kinetic_propagator(m.grid, m.eps, h);
  auto kinetic = [&](ManyBodyState& s, const std::vector<AxisMultiplier>& k) {
    for (int p = 0; p < m.particles; ++p) apply_axis_multipliers(s.psi, m.grid, k, p);
  };

  const Eigen::ArrayXd pair = m.prefactor * pair_sum(m.kernel.table(), m.particles);
  Eigen::ArrayXd vshape;
  if (m.V.enabled)
    vshape = particle_sum(sample_potential(m.V, m.grid, m.free_dim, m.eps, 0.0, false) / m.V.envelope(0.0),
                          m.particles);
  const bool autonomous = !m.V.enabled || m.V.autonomous();
  auto potential_at = [&](double t) -> Eigen::ArrayXd {
    if (!m.V.enabled) return pair;
    return pair + m.V.envelope(t) * vshape;
  };
  auto phase_of = [&](const Eigen::ArrayXd& v) -> Eigen::ArrayXcd {
    const double worst = std::abs(h) * v.abs().maxCoeff();
    if (worst > std::numbers::pi)
      throw GuardError("potential phase increment " + std::to_string(worst) + " exceeds pi; reduce the time step");
    return (cplx(0.0, -h) * v.cast<cplx>()).exp();
  };
  Eigen::ArrayXcd phase;
  if (autonomous) phase = phase_of(potential_at(0.0));

  ManyBodyState s = s0;
  if (observe) observe(s);
  if (steps == 0) return s;
  kinetic(s, half);
  for (long step = 1; step <= steps; ++step) {
    const double tmid = s0.t + (step - 0.5) * h;
    if (autonomous)
      s.psi.data.array() *= phase;
    else
      s.psi.data.array() *= phase_of(potential_at(tmid));
    s.t = s0.t + step * h;
    const bool emit = step == steps || step % opt.stride == 0;
    if (emit) {
      kinetic(s, half);
      if (observe) observe(s);
      if (step < steps) kinetic(s, half);
    } else {
      kinetic(s, full);
    }
  }
  return s;
}

std::vector<ManyBodyState> evolve_manybody(const ManyBodyState& s0, const ManyBodyModel& m, double T, double dt,
                                           const EvolveOptions& opt) {
  std::vector<ManyBodyState> out;
  evolve_manybody(s0, m, T, dt, [&](const ManyBodyState& s) { out.push_back(s); }, opt);
  return out;
}

Eigen::MatrixXcd kinetic_matrix(const Grid& g, double eps) {
  const Index d = g.size();
  std::vector<Index> shape;
  for (const auto& ax : g.axes) shape.push_back(ax.n);
  shape.push_back(d);
  Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> K =
      Eigen::MatrixXcd::Zero(d, d);
  for (int a = 0; a < g.rank(); ++a) {
    const Axis& ax = g.axes[a];
    const double scale = ax.kind == AxisKind::dirichlet ? 1.0 / (eps * eps) : 1.0;
    AxisMultiplier k2(ax, [](double k) { return cplx(k * k); });
    // Row-major identity: column c is the unit vector e_c along the leading grid axes.
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> E = Eigen::MatrixXcd::Identity(d, d);
    k2.apply(E.data(), shape, a);
    K += scale * E;
  }
  return K;
}

double manybody_energy(const ManyBodyState& s, const ManyBodyModel& m) {
  return manybody_energy(s, m, density_matrix(s.psi));
}

double manybody_energy(const ManyBodyState& s, const ManyBodyModel& m, const Eigen::MatrixXcd& gamma) {
  const Tensor& c = s.psi;
  if (generator_residual(c) > 1e-8 * std::max(1.0, c.norm()))
    throw InvariantError("manybody_energy: state is not permutation symmetric");
  const double kin = (kinetic_matrix(m.grid, m.eps) * gamma).trace().real();
  const Eigen::VectorXd rho1 = gamma.diagonal().real();
  double pot = 0.0;
  if (m.V.enabled) pot = rho1.dot(sample_potential(m.V, m.grid, m.free_dim, m.eps, s.t, false).matrix());
  double inter = 0.0;
  if (c.particles >= 2)
    inter = 0.5 * (c.particles - 1) * m.prefactor * (pair_density(c).array() * m.kernel.table().array()).sum();
  return kin + pot + inter;
}

}  // namespace cmf
