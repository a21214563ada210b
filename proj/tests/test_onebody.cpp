#include "cmf/errors.hpp"
#include "cmf/onebody.hpp"
#include "support.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace cmf;
using std::numbers::pi;

namespace {

ConfinedDomain unit_interval(double eps = 1.0, int n = 16) { return ConfinedDomain{{-0.5}, {0.5}, {n}, eps}; }

ModelSpec base_spec(Regime regime = Regime::hartree) {
  ModelSpec s;
  s.particles = 2;
  s.regime = regime;
  s.theta = regime == Regime::hartree ? 0.0 : 0.3;
  s.free = FreeDomain{{16.0}, {64}};
  s.confined = unit_interval(0.5, 8);
  s.w = InteractionProfile{ProfileKind::compact_bump, 2.0, 1.0};
  return s;
}

double l2_distance(const GridFunction& a, const GridFunction& b) {
  return std::sqrt(a.grid.cell_volume() * (a.values - b.values).squaredNorm());
}

}  // namespace

TEST_CASE("ground mode eigenvalues") {
  CHECK(chi_mode(unit_interval(1.0), 0).E_eps() == doctest::Approx(pi * pi).epsilon(1e-14));
  CHECK(chi_mode(unit_interval(0.1), 0).E_eps() == doctest::Approx(100 * pi * pi).epsilon(1e-14));
}

TEST_CASE("ground mode quartic integral") {
  // Oracle: adaptive quadrature of (sqrt(2) sin(pi y))^4 on [0,1].
  const double oracle = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [](double y) { return std::pow(std::sqrt(2.0) * std::sin(pi * y), 4); }, 0.0, 1.0, 10, 1e-15);
  CHECK(oracle == doctest::Approx(1.5).epsilon(1e-13));
  CHECK(quartic_integral(chi_mode(unit_interval(1.0, 16), 0)) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("confined modes are normalized eigenfunctions") {
  for (double eps : {1.0, 0.3}) {
    ConfinedDomain d{{-0.3, -0.5}, {0.7, 0.6}, {16, 8}, eps};
    for (int m = 0; m < 6; ++m) {
      auto mode = chi_mode(d, m);
      CHECK(mode.chi.norm() == doctest::Approx(1.0).epsilon(1e-10));
      auto lap = laplacian_confined(mode.chi, eps);
      const double rel = (lap.values - mode.E_eps() * mode.chi.values).norm() / (mode.E_eps() * mode.chi.values.norm());
      CHECK(rel < 1e-8);
    }
  }
}

TEST_CASE("mode ordering and range") {
  ConfinedDomain sq{{-0.5, -0.5}, {0.5, 0.5}, {8, 8}, 1.0};
  CHECK(chi_mode(sq, 0).axis_modes == std::vector<int>{0, 0});
  CHECK(chi_mode(sq, 1).axis_modes == std::vector<int>{0, 1});
  CHECK(chi_mode(sq, 2).axis_modes == std::vector<int>{1, 0});
  CHECK(chi_mode(sq, 1).E == doctest::Approx(chi_mode(sq, 2).E));
  CHECK_NOTHROW(chi_mode(unit_interval(1.0, 8), 6));
  CHECK_THROWS_AS(chi_mode(unit_interval(1.0, 8), 7), std::out_of_range);
}

TEST_CASE("coupling constant") {
  auto chi1 = chi_mode(unit_interval(1.0, 32), 0);
  CHECK(coupling_b(0.0, chi1) == 0.0);
  auto zero = InteractionProfile{ProfileKind::compact_bump, 0.0, 1.0};
  CHECK(coupling_b(zero, chi1, 2) == 0.0);

  auto chi2 = chi_mode(ConfinedDomain{{-0.5, -0.5}, {0.5, 0.5}, {16, 16}, 1.0}, 0);
  CHECK(coupling_b(1.0, chi2) == doctest::Approx(9.0 / 4.0).epsilon(1e-12));

  auto g = with_mass(InteractionProfile{ProfileKind::gaussian_bump, 1.0, 0.8}, 1.0, 2);
  CHECK(g.integral(2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(coupling_b(g, chi1, 2) == doctest::Approx(1.5).epsilon(1e-12));

  CHECK_THROWS_AS(coupling_b(InteractionProfile{ProfileKind::coulomb, 1.0, 1.0, {}, {}, SplitRule::ball}, chi1, 3),
                  ConfigError);
}

TEST_CASE("interaction profile radial integrals") {
  // Closed forms: compact bump in 1D: 2 A R * 8/15; in 3D: 4 pi A R^3 * 8/105.
  InteractionProfile p{ProfileKind::compact_bump, 1.5, 0.7};
  CHECK(p.integral(1) == doctest::Approx(2 * 1.5 * 0.7 * 8.0 / 15.0).epsilon(1e-12));
  CHECK(p.integral(3) == doctest::Approx(4 * pi * 1.5 * std::pow(0.7, 3) * 8.0 / 105.0).epsilon(1e-12));
  InteractionProfile t{ProfileKind::tabulated, 2.0, 1.0, {0.0, 1.0}, {1.0, 0.0}};
  CHECK(t(0.25) == doctest::Approx(1.5));
  CHECK(t.integral(1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("hartree potential agrees with direct summation in both convolution modes") {
  testsupport::Gen gen(21);
  auto free = free_grid(FreeDomain{{8.0}, {32}});
  GridFunction Phi(free, gen.cvector(32));
  InteractionProfile w{ProfileKind::compact_bump, 1.0, 3.0};
  const double h = free.axes[0].spacing();
  for (auto mode : {ConvolutionMode::periodic, ConvolutionMode::zero_padded}) {
    auto v = hartree_potential(Phi, hartree_kernel(w, free, mode));
    double err = 0.0;
    for (int i = 0; i < 32; ++i) {
      double direct = 0.0;
      for (int j = 0; j < 32; ++j) {
        const double dx = mode == ConvolutionMode::periodic ? min_image((i - j) * h, 8.0) : (i - j) * h;
        direct += h * w(dx) * std::norm(Phi.values(j));
      }
      err = std::max(err, std::abs(v.values(i).real() - direct));
    }
    CHECK(err < 1e-12 * v.values.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("hartree potential support guard") {
  auto free = free_grid(FreeDomain{{4.0}, {16}});
  InteractionProfile w{ProfileKind::compact_bump, 1.0, 2.5};
  CHECK_THROWS_AS(hartree_kernel(w, free, ConvolutionMode::periodic), GuardError);
  CHECK_NOTHROW(hartree_kernel(w, free, ConvolutionMode::zero_padded));
  w.support = 4.5;
  CHECK_THROWS_AS(hartree_kernel(w, free, ConvolutionMode::zero_padded), GuardError);
}

TEST_CASE("hartree potential is translation equivariant and nonnegative") {
  testsupport::Gen gen(23);
  auto free = free_grid(FreeDomain{{10.0, 6.0}, {16, 16}});
  GridFunction Phi(free, gen.cvector(free.size()));
  auto k = hartree_kernel(InteractionProfile{ProfileKind::gaussian_bump, 1.0, 2.0}, free);
  auto v = hartree_potential(Phi, k);
  GridFunction shifted(free);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) shifted.values(((i + 3) % 16) * 16 + (j + 5) % 16) = Phi.values(i * 16 + j);
  auto vs = hartree_potential(shifted, k);
  double err = 0.0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      err = std::max(err, std::abs(vs.values(((i + 3) % 16) * 16 + (j + 5) % 16) - v.values(i * 16 + j)));
  CHECK(err < 1e-12 * v.values.cwiseAbs().maxCoeff());
  CHECK(v.values.real().minCoeff() >= -1e-13 * v.values.real().maxCoeff());
}

TEST_CASE("narrow normalized kernels approach the density") {
  double prev = 1e300;
  for (int n : {128, 256, 512}) {
    auto free = free_grid(FreeDomain{{12.0}, {n}});
    std::vector<double> c{0.0}, k{0.0};
    auto Phi = gaussian_packet(free, 1.0, c, k);
    const double width = 16.0 * free.axes[0].spacing();
    auto w = with_mass(InteractionProfile{ProfileKind::compact_bump, 1.0, width}, 1.0, 1);
    auto v = hartree_potential(Phi, hartree_kernel(w, free));
    const double err = (v.values.real().array() - Phi.values.array().abs2()).abs().maxCoeff();
    // Second-order moment error: halving the width should cut it about 4x.
    CHECK(err < prev / 3.0);
    prev = err;
  }
}

TEST_CASE("free gaussian widening matches the analytic variance") {
  ModelSpec spec = base_spec();
  spec.free = FreeDomain{{48.0}, {256}};
  spec.w.amplitude = 0.0;
  auto model = make_effective_model(spec);
  const double sigma = 1.0, T = 1.0;
  std::vector<double> c{0.0}, k{0.0};
  auto s0 = make_onebody_state(gaussian_packet(model.free, sigma, c, k), model.mode);
  auto traj = evolve_effective(s0, model, T, 0.01, 100);
  const auto& Phi = traj.states.back().Phi;
  double var = 0.0;
  for (int i = 0; i < 256; ++i) var += Phi.grid.cell_volume() * std::pow(Phi.grid.axes[0].node(i), 2) * std::norm(Phi.values(i));
  const double analytic = sigma * sigma * (1.0 + T * T / std::pow(sigma, 4));
  CHECK(std::abs(var - analytic) < 1e-4);
}

TEST_CASE("linear eigenstate keeps its modulus") {
  ModelSpec spec = base_spec(Regime::nls);
  spec.w.amplitude = 0.0;
  auto model = make_effective_model(spec);
  CHECK(model.b == 0.0);
  const double L = 16.0;
  auto Phi = sample(model.free, [&](auto x) { return cplx(std::sqrt(2.0 / L) * std::sin(2 * pi * x[0] / L)); });
  auto traj = evolve_effective(make_onebody_state(Phi, model.mode), model, 1.0, 0.01, 10);
  for (const auto& s : traj.states)
    CHECK((s.Phi.values.cwiseAbs() - Phi.values.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("time reversal returns the initial state") {
  ModelSpec spec = base_spec();
  auto model = make_effective_model(spec);
  std::vector<double> c{0.5}, k{1.0};
  auto s0 = make_onebody_state(gaussian_packet(model.free, 1.0, c, k), model.mode);
  auto fwd = evolve_effective(s0, model, 1.0, 0.01, 1000).states.back();
  auto back = evolve_effective(fwd, model, -1.0, 0.01, 1000).states.back();
  CHECK(l2_distance(back.Phi, s0.Phi) < 1e-7);
  CHECK(back.t == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("energy of a box mode and linearity in the coupling") {
  ModelSpec spec = base_spec(Regime::nls);
  spec.w.amplitude = 0.0;
  auto model = make_effective_model(spec);
  const double L = 16.0;
  auto Phi = sample(model.free, [&](auto x) { return cplx(std::sqrt(2.0 / L) * std::sin(2 * pi * x[0] / L)); });
  auto s = make_onebody_state(Phi, model.mode);
  CHECK(effective_energy(s, model) == doctest::Approx(std::pow(2 * pi / L, 2) + model.mode.E_eps()).epsilon(1e-12));

  std::vector<double> c{0.0}, k{0.0};
  auto g = make_onebody_state(gaussian_packet(model.free, 1.0, c, k), model.mode);
  model.b = 0.0;
  const double e0 = effective_energy(g, model);
  model.b = 1.3;
  const double e1 = effective_energy(g, model);
  model.b = 2.6;
  const double e2 = effective_energy(g, model);
  CHECK(std::abs((e2 - e0) - 2.0 * (e1 - e0)) < 1e-12 * std::abs(e2));
}

TEST_CASE("mass and energy conservation, Hartree and NLS") {
  for (Regime r : {Regime::hartree, Regime::nls}) {
    ModelSpec spec = base_spec(r);
    auto model = make_effective_model(spec);
    std::vector<double> c{0.0}, k{0.8};
    auto s0 = make_onebody_state(gaussian_packet(model.free, 1.0, c, k), model.mode);
    const double E0 = effective_energy(s0, model);
    auto traj = evolve_effective(s0, model, 1.0, 1e-3, 100);
    for (const auto& s : traj.states) {
      CHECK(std::abs(s.Phi.norm() - 1.0) < 1e-9);
      CHECK(std::abs(effective_energy(s, model) - E0) <= 1e-6 * std::abs(E0));
    }
  }
}

TEST_CASE("Strang splitting is second order") {
  ModelSpec spec = base_spec();
  spec.w.amplitude = 8.0;
  spec.V = ExternalPotential{true, 0.5, 0.0, {0.0}, 0.3, 2.0};
  auto model = make_effective_model(spec);
  std::vector<double> c{0.3}, k{0.5};
  auto s0 = make_onebody_state(gaussian_packet(model.free, 1.0, c, k), model.mode);
  const double dt = 0.02;
  auto ref = evolve_effective(s0, model, 1.0, dt / 8, 1000).states.back();
  auto a = evolve_effective(s0, model, 1.0, dt, 1000).states.back();
  auto b = evolve_effective(s0, model, 1.0, dt / 2, 1000).states.back();
  const double ratio = l2_distance(a.Phi, ref.Phi) / l2_distance(b.Phi, ref.Phi);
  CHECK(std::abs(ratio - 4.0) <= 0.5);
}

TEST_CASE("aliasing guard") {
  ModelSpec spec = base_spec(Regime::nls);
  spec.w.amplitude = 1e4;
  auto model = make_effective_model(spec);
  std::vector<double> c{0.0}, k{0.0};
  auto s0 = make_onebody_state(gaussian_packet(model.free, 0.5, c, k), model.mode);
  CHECK_THROWS_AS(evolve_effective(s0, model, 0.5, 0.1), GuardError);
  CHECK_THROWS_AS(evolve_effective(s0, model, 0.55, 0.1), std::invalid_argument);
}

TEST_CASE("sup norms") {
  ModelSpec spec = base_spec();
  auto model = make_effective_model(spec);
  const double V = 16.0;
  auto Phi = sample(model.free, [&](auto) { return cplx(1.0 / std::sqrt(V)); });
  auto s = make_onebody_state(Phi, model.mode);
  auto n = sup_norms(s);
  CHECK(n.Phi_inf == doctest::Approx(1.0 / std::sqrt(V)).epsilon(1e-14));
  CHECK(n.phi_inf == doctest::Approx(s.phi().sup_norm()).epsilon(1e-14));
  CHECK(n.lap_Phi_L2 < 1e-12);
}

TEST_CASE("H2 norm of band-limited data matches the coefficient sum") {
  testsupport::Gen gen(29);
  const double L = 10.0;
  auto free = free_grid(FreeDomain{{L}, {32}});
  std::vector<int> modes;
  std::vector<cplx> coef;
  for (int m = -5; m <= 5; ++m) {
    modes.push_back(m);
    coef.push_back(gen.cnormal());
  }
  auto f = sample(free, [&](auto x) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i) s += coef[i] * std::polar(1.0, 2 * pi * modes[i] * x[0] / L);
    return s;
  });
  double h2 = 0.0, lap = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const double k2 = std::pow(2 * pi * modes[i] / L, 2);
    h2 += L * std::pow(1 + k2, 2) * std::norm(coef[i]);
    lap += L * k2 * k2 * std::norm(coef[i]);
  }
  CHECK(h2_norm(f) == doctest::Approx(std::sqrt(h2)).epsilon(1e-10));
  CHECK(laplacian_l2(f) == doctest::Approx(std::sqrt(lap)).epsilon(1e-10));
}

TEST_CASE("density Laplacian norm matches separable quadrature") {
  ModelSpec spec = base_spec();
  spec.free = FreeDomain{{20.0}, {128}};
  spec.confined = ConfinedDomain{{-0.4}, {0.6}, {64}, 0.5};
  auto model = make_effective_model(spec);
  const double sigma = 1.0;
  std::vector<double> c{0.0}, k{0.0};
  auto s = make_onebody_state(gaussian_packet(model.free, sigma, c, k), model.mode);
  using boost::math::quadrature::gauss_kronrod;
  auto rho = [&](double x) { return std::exp(-x * x / (2 * sigma * sigma)) / std::sqrt(2 * pi * sigma * sigma); };
  auto rho2 = [&](double x) { return rho(x) * (x * x / std::pow(sigma, 4) - 1 / (sigma * sigma)); };
  auto ry = [](double u) { return 2.0 * std::pow(std::sin(pi * u), 2); };
  auto ry2 = [](double u) { return 4.0 * pi * pi * std::cos(2 * pi * u); };
  auto I = [](auto f, double a, double b) { return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14); };
  const double A = I([&](double x) { return rho2(x) * rho2(x); }, -10, 10);
  const double C = I([&](double x) { return rho2(x) * rho(x); }, -10, 10);
  const double E = I([&](double x) { return rho(x) * rho(x); }, -10, 10);
  const double B = I([&](double u) { return ry(u) * ry(u); }, 0, 1);
  const double D = I([&](double u) { return ry(u) * ry2(u); }, 0, 1);
  const double F = I([&](double u) { return ry2(u) * ry2(u); }, 0, 1);
  const double oracle = std::sqrt(A * B + 2 * C * D + E * F);
  CHECK(density_laplacian_l2(s) == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("narrow Hartree kernels converge to the local nonlinearity") {
  ModelSpec nls = base_spec(Regime::nls);
  nls.free = FreeDomain{{16.0}, {256}};
  nls.w = with_mass(InteractionProfile{ProfileKind::compact_bump, 1.0, 0.5}, 1.0, 2);
  auto mn = make_effective_model(nls);
  std::vector<double> c{0.0}, k{0.7};
  auto s0 = make_onebody_state(gaussian_packet(mn.free, 1.0, c, k), mn.mode);
  auto target = evolve_effective(s0, mn, 1.0, 0.005, 1000).states.back();
  double prev = 1e300;
  for (double width : {1.0, 0.5, 0.25}) {
    EffectiveModel mh = mn;
    mh.regime = Regime::hartree;
    auto w0 = with_mass(InteractionProfile{ProfileKind::compact_bump, 1.0, width}, mn.b, 1);
    mh.kernel = hartree_kernel(w0, mh.free);
    auto s = evolve_effective(s0, mh, 1.0, 0.005, 1000).states.back();
    const double d = l2_distance(s.Phi, target.Phi);
    CHECK(d < prev);
    prev = d;
  }
}
