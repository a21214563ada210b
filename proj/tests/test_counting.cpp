#include "cmf/counting.hpp"
#include "cmf/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace cmf;

namespace {

using Mat = Eigen::MatrixXcd;

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Dense one-body operator M on particle j of N.
Mat on_particle(const Mat& M, int j, int N) {
  const Index d = M.rows();
  Mat out = Mat::Identity(1, 1);
  for (int i = 0; i < N; ++i) out = kron(out, i == j ? M : Mat::Identity(d, d));
  return out;
}

// Dense P_{k,N} as the sum over all q/p patterns with k factors of q.
Mat dense_sector(const Eigen::VectorXcd& phi, int k, int N) {
  const Index d = phi.size();
  const Mat p = phi * phi.adjoint();
  const Mat q = Mat::Identity(d, d) - p;
  Mat out = Mat::Zero(ipow(d, N), ipow(d, N));
  for (unsigned mask = 0; mask < (1u << N); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    Mat term = Mat::Identity(1, 1);
    for (int i = 0; i < N; ++i) term = kron(term, (mask >> i) & 1u ? q : p);
    out += term;
  }
  return out;
}

Mat dense_hat(const WeightFunction& f, const Eigen::VectorXcd& phi, int N) {
  Mat out = Mat::Zero(ipow(phi.size(), N), ipow(phi.size(), N));
  for (int k = 0; k <= N; ++k) out += f(k) * dense_sector(phi, k, N);
  return out;
}

WeightFunction random_weight(testsupport::Gen& g, int N) {
  std::vector<double> v(N + 1);
  for (auto& x : v) x = g.uniform(-2.0, 2.0);
  return weight_custom(v);
}

// Orthonormal vectors orthogonal to phi.
std::vector<Eigen::VectorXcd> complement_basis(const Eigen::VectorXcd& phi, testsupport::Gen& g, int count) {
  std::vector<Eigen::VectorXcd> out;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXcd v = g.cvector(phi.size());
    v -= phi * phi.dot(v);
    for (const auto& u : out) v -= u * u.dot(v);
    out.push_back(v / v.norm());
  }
  return out;
}

// Sym(phi^{N-k} (x) e_1 (x) .. (x) e_k) with excitations cycling through `excited`.
Tensor excited_state(const Eigen::VectorXcd& phi, const std::vector<Eigen::VectorXcd>& excited, int N, int k) {
  std::vector<Eigen::VectorXcd> f;
  for (int i = 0; i < N - k; ++i) f.push_back(phi);
  for (int i = 0; i < k; ++i) f.push_back(excited[i % excited.size()]);
  return symmetrize(tensor_product(f));
}

ModelSpec grid_spec(int N) {
  ModelSpec s;
  s.particles = N;
  s.regime = Regime::hartree;
  s.free = FreeDomain{{8.0}, {8}};
  s.confined = ConfinedDomain{{-0.5}, {0.5}, {4}, 0.5};
  s.w = InteractionProfile{ProfileKind::compact_bump, 2.0, 2.0};
  return s;
}

OneBodyState grid_mode(const ModelSpec& s, int confined = 0, double k = 0.7) {
  std::vector<double> c{0.2}, mom{k};
  return make_onebody_state(gaussian_packet(free_grid(s.free), 1.1, c, mom), chi_mode(s.confined, confined));
}

}  // namespace

TEST_CASE("weight functions and index shifts") {
  const int N = 5;
  auto n = weight_sqrt_fraction(N);
  for (int k = 0; k <= N; ++k) CHECK(n(k) == std::sqrt(double(k) / N));
  auto mu = weight_mu(N);
  auto mu1 = weight_mu1(N);
  auto ninv = weight_inverse_sqrt_fraction(N);
  CHECK(ninv(0) == 0.0);
  for (int k = 1; k <= N; ++k) {
    CHECK(mu(k) == doctest::Approx(std::sqrt(double(N)) * (std::sqrt(double(k)) - std::sqrt(k - 1.0))));
    CHECK(mu(k) <= ninv(k) + 1e-14);
    if (k >= 2) CHECK(mu1(k) <= 2.0 * ninv(k) + 1e-14);
  }
  auto up = shift(n, 2);
  CHECK(up(0) == n(2));
  CHECK(up(N) == 0.0);
  CHECK(shift(n, 2, ShiftRule::extend)(N) == doctest::Approx(std::sqrt((N + 2.0) / N)));
  CHECK(shift(n, -1)(0) == 0.0);
  CHECK_THROWS(shift(weight_custom({1.0, 2.0}), 1, ShiftRule::extend));
}

TEST_CASE("excitation counts") {
  auto k = excitation_counts(3, 3);
  CHECK(k(0) == 0);
  CHECK(k(1) == 1);
  CHECK(k(4) == 2);
  CHECK(k(26) == 3);
  CHECK(k(9) == 1);
  CHECK(k.sum() == 27 * 3 * 2 / 3);
}

TEST_CASE("hat operator matches the dense Kronecker oracle") {
  testsupport::Gen g(101);
  for (int N = 2; N <= 4; ++N) {
    const Condensate c = make_condensate(g.unit(4));
    const Tensor psi = random_symmetric_state(N, 4, g.engine());
    const auto f = random_weight(g, N);
    const Eigen::VectorXcd expect = dense_hat(f, c.phi, N) * psi.data;
    CHECK((hat_apply(f, psi, c).data - expect).norm() < 1e-12);
    CHECK((hat_apply(f, psi, c, HatRoute::patterns).data - expect).norm() < 1e-12);
    // Asymmetric input: the operator is defined on the full tensor space.
    const Tensor raw(N, 4, g.unit(ipow(4, N)));
    CHECK((hat_apply(f, raw, c).data - dense_hat(f, c.phi, N) * raw.data).norm() < 1e-12);
  }
}

TEST_CASE("completeness and number identity") {
  testsupport::Gen g(103);
  for (int N = 2; N <= 5; ++N) {
    const Condensate c = make_condensate(g.unit(4));
    const Tensor psi = random_symmetric_state(N, 4, g.engine());
    Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(psi.data.size());
    for (int k = 0; k <= N; ++k) {
      const Tensor Pk = sector_projection(k, psi, c);
      sum += Pk.data;
      Eigen::VectorXcd qsum = Eigen::VectorXcd::Zero(psi.data.size());
      for (int i = 0; i < N; ++i) {
        Tensor t = Pk;
        apply_q(t, c, i);
        qsum += t.data;
      }
      CHECK((qsum - k * Pk.data).norm() <= 1e-10);
    }
    CHECK((sum - psi.data).norm() <= 1e-10);
  }
  // Dense operator identities.
  for (int N = 2; N <= 4; ++N) {
    const Eigen::VectorXcd phi = g.unit(4);
    const Mat q = Mat::Identity(4, 4) - phi * phi.adjoint();
    Mat total = Mat::Zero(ipow(4, N), ipow(4, N));
    for (int k = 0; k <= N; ++k) {
      const Mat Pk = dense_sector(phi, k, N);
      total += Pk;
      Mat qsum = Mat::Zero(Pk.rows(), Pk.cols());
      for (int i = 0; i < N; ++i) qsum += on_particle(q, i, N);
      CHECK((qsum * Pk - double(k) * Pk).norm() <= 1e-10);
    }
    CHECK((total - Mat::Identity(total.rows(), total.cols())).norm() <= 1e-10);
  }
  // Grid route.
  for (int N : {2, 3}) {
    ModelSpec s = grid_spec(N);
    const Condensate c = make_condensate(grid_mode(s));
    const Tensor psi = perturbed_product_state(c, N, 0.02, g.engine());
    Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(psi.data.size());
    for (int k = 0; k <= N; ++k) sum += sector_projection(k, psi, c).data;
    CHECK((sum - psi.data).norm() <= 1e-10);
  }
}

TEST_CASE("composition and commutation of hat operators") {
  testsupport::Gen g(107);
  for (int N = 2; N <= 5; ++N) {
    const Condensate c = make_condensate(g.unit(4));
    const Tensor psi = random_symmetric_state(N, 4, g.engine());
    const auto f = random_weight(g, N), h = random_weight(g, N);
    const Tensor fg = hat_apply(f, hat_apply(h, psi, c), c);
    CHECK((fg.data - hat_apply(product(f, h), psi, c).data).norm() <= 1e-10);
    CHECK((fg.data - hat_apply(h, hat_apply(f, psi, c), c).data).norm() <= 1e-10);
    for (int j = 0; j < N; ++j) {
      Tensor a = hat_apply(f, psi, c);
      apply_p(a, c, j);
      Tensor b = psi;
      apply_p(b, c, j);
      b = hat_apply(f, b, c);
      CHECK((a.data - b.data).norm() <= 1e-10);
    }
  }
}

TEST_CASE("shift identity for pair operators") {
  testsupport::Gen g(109);
  const PairProjector all[] = {PairProjector::pp, PairProjector::pq, PairProjector::qp, PairProjector::qq};
  for (int N = 2; N <= 5; ++N) {
    const Condensate c = make_condensate(g.unit(4));
    const Tensor psi = random_symmetric_state(N, 4, g.engine());
    const auto f = random_weight(g, N);
    Mat T(4, 4);
    for (Index a = 0; a < 4; ++a)
      for (Index b = 0; b < 4; ++b) T(a, b) = g.cnormal();
    for (auto l : all)
      for (auto r : all) CHECK(shift_identity_residual(f, l, T, r, psi, c) <= 1e-9);
    CHECK(shift_identity_residual(f, PairProjector::qp, Mat::Ones(4, 4), PairProjector::qp, psi, c) < 1e-13);
  }
}

TEST_CASE("density matrix") {
  testsupport::Gen g(113);
  const Condensate c = make_condensate(g.unit(4));
  auto perp = complement_basis(c.phi, g, 1)[0];

  const Mat g0 = density_matrix(tensor_power(c.phi, 3));
  CHECK((g0 - c.phi * c.phi.adjoint()).norm() < 1e-12);

  const Mat g1 = density_matrix(symmetrize(tensor_product({c.phi, perp})));
  Eigen::SelfAdjointEigenSolver<Mat> es(g1);
  CHECK(es.eigenvalues()(3) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(es.eigenvalues()(2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(es.eigenvalues()(1)) < 1e-12);

  const Tensor psi = random_symmetric_state(3, 4, g.engine());
  const Mat gamma = density_matrix(psi);
  Mat oracle = Mat::Zero(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) oracle(a, b) += psi.data(a * 16 + x * 4 + y) * std::conj(psi.data(b * 16 + x * 4 + y));
  CHECK((gamma - oracle).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(gamma.trace() - 1.0) < 1e-9);
  CHECK((gamma - gamma.adjoint()).norm() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Mat> es2(gamma);
  CHECK(es2.eigenvalues().minCoeff() >= -1e-9);
}

TEST_CASE("counting functionals on sharp occupancy states") {
  testsupport::Gen g(127);
  const Condensate c = make_condensate(g.unit(4));
  const auto same = complement_basis(c.phi, g, 1);
  const auto distinct = complement_basis(c.phi, g, 3);
  for (int N = 1; N <= 5; ++N)
    for (int k = 0; k <= N; ++k)
      for (const auto* ex : {&same, &distinct}) {
        const Tensor psi = excited_state(c.phi, *ex, N, k);
        CHECK(std::abs(alpha(psi, c) - double(k) / N) <= 1e-10);
        CHECK(std::abs(beta(psi, c) - std::sqrt(double(k) / N)) <= 1e-10);
        const auto p = occupation_distribution(psi, c);
        for (int j = 0; j <= N; ++j) CHECK(std::abs(p[j] - (j == k ? 1.0 : 0.0)) <= 1e-10);
        WeightFunction lin = weight_custom(std::vector<double>(N + 1));
        for (int j = 0; j <= N; ++j) lin.values[j] = j;
        CHECK((hat_apply(lin, psi, c).data - double(k) * psi.data).norm() <= 1e-10);
      }
  const Tensor prod = tensor_power(c.phi, 4);
  CHECK(alpha(prod, c) < 1e-15);
  CHECK(beta_tilde(prod, c, 1.5, 1.5) < 1e-15);
}

TEST_CASE("routes agree on random states") {
  testsupport::Gen g(131);
  for (int trial = 0; trial < 20; ++trial) {
    const int N = g.integer(2, 5);
    const Condensate c = make_condensate(g.unit(4));
    const Tensor psi = perturbed_product_state(c, N, g.uniform(0.0, 1.0), g.engine());
    const double a = alpha(psi, c);
    CHECK(std::abs(a - alpha_from_density(density_matrix(psi), c)) <= 1e-10);
    const auto p0 = occupation_distribution(psi, c);
    const auto p1 = occupation_distribution(psi, c, OccupationRoute::patterns);
    const auto p2 = occupation_distribution(psi, c, OccupationRoute::shortcut);
    double total = 0.0, mean = 0.0, b = 0.0;
    for (int k = 0; k <= N; ++k) {
      CHECK(std::abs(p0[k] - p1[k]) <= 1e-9);
      CHECK(std::abs(p0[k] - p2[k]) <= 1e-9);
      CHECK(p0[k] >= -1e-15);
      const Tensor Pk = sector_projection(k, psi, c);
      CHECK(std::abs(p0[k] - Pk.data.squaredNorm()) <= 1e-12);
      total += p0[k];
      mean += double(k) / N * p0[k];
      b += std::sqrt(double(k) / N) * p0[k];
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
    CHECK(std::abs(mean - a) <= 1e-9);
    CHECK(std::abs(b - beta(psi, c)) <= 1e-9);
    CHECK(a <= beta(psi, c) + 1e-15);
  }
  const Condensate c = make_condensate(g.unit(4));
  const Tensor asym(3, 4, g.unit(64));
  CHECK_THROWS_AS(occupation_distribution(asym, c, OccupationRoute::shortcut), InvariantError);
  CHECK_NOTHROW(occupation_distribution(asym, c, OccupationRoute::patterns));
}

TEST_CASE("trace distance and sandwich") {
  testsupport::Gen g(137);
  const Condensate c = make_condensate(g.unit(4));
  const auto perp = complement_basis(c.phi, g, 1)[0];
  CHECK(trace_distance(c.phi * c.phi.adjoint(), c) < 1e-12);
  CHECK(trace_distance(perp * perp.adjoint(), c) == doctest::Approx(2.0).epsilon(1e-12));
  for (int trial = 0; trial < 100; ++trial) {
    const int N = 2 + trial % 4;
    const Condensate cc = make_condensate(g.unit(4));
    const Tensor psi = perturbed_product_state(cc, N, std::pow(10.0, g.uniform(-3.0, 0.5)), g.engine());
    const double a = alpha(psi, cc);
    const double tr = trace_distance(density_matrix(psi), cc);
    CHECK(a <= tr + 1e-12);
    CHECK(tr <= std::sqrt(8.0 * a) + 1e-9);
  }
}

TEST_CASE("weight difference bound") {
  testsupport::Gen g(139);
  const Condensate c = make_condensate(g.unit(4));
  const auto zero = weight_difference_bound(weight_fraction(3), 1, tensor_power(c.phi, 3), c);
  CHECK(zero.lhs < 1e-15);
  for (int trial = 0; trial < 30; ++trial) {
    const int N = g.integer(2, 5);
    const Tensor psi = random_symmetric_state(N, 4, g.engine());
    const auto a = weight_difference_bound(weight_fraction(N), 1, psi, c);
    CHECK(a.rhs == doctest::Approx(1.0 / N));
    CHECK(a.lhs <= a.rhs + 1e-10);
    const auto b = weight_difference_bound(weight_sqrt_fraction(N), 2, psi, c);
    CHECK(b.lhs <= 2.0 / N + 1e-10);
  }
  // With the zero convention the top sector breaks the bound; the closed form is required.
  const Tensor top = tensor_power(complement_basis(c.phi, g, 1)[0], 2);
  CHECK(weight_difference_bound(weight_fraction(2), 1, top, c).lhs == doctest::Approx(0.5));
  CHECK_THROWS(weight_difference_bound(weight_custom({0.0, 0.5, 1.0}), 1, top, c));
}

TEST_CASE("condensate normalization is enforced") {
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(4) * 0.5;
  CHECK_NOTHROW(make_condensate(v));
  v(0) *= 1.001;
  CHECK_THROWS_AS(make_condensate(v), InvariantError);
}

TEST_CASE("derivative terms") {
  ModelSpec s = grid_spec(2);
  auto mm = make_manybody_model(s);
  auto em = make_effective_model(s);
  auto phi = grid_mode(s);
  ManyBodyState prod = product_state(phi, 2);
  auto d0 = derivative_terms(prod, phi, mm, em);
  CHECK(d0.II < 1e-14);
  CHECK(d0.III < 1e-14);
  CHECK(std::abs(d0.total) <= d0.I + 1e-15);

  // Interaction independent of the confined offset and equal to w0: the mean field cancels.
  ManyBodyModel flat = mm;
  flat.kernel = PairKernel(mm.grid, 1, [&](std::span<const double> dx, std::span<const double>) {
    return s.w(std::abs(dx[0]));
  });
  testsupport::Gen g(149);
  const Condensate c = make_condensate(phi);
  ManyBodyState mixed{mm.grid, perturbed_product_state(c, 2, 0.05, g.engine()), 0.0};
  auto d1 = derivative_terms(mixed, phi, flat, em);
  CHECK(d1.I < 1e-14);
  CHECK(d1.II > 1e-6);

  auto d2 = derivative_terms(mixed, phi, mm, em);
  CHECK(std::abs(d2.total) <= d2.I + d2.II + d2.III + 1e-14);

  ModelSpec nls = s;
  nls.regime = Regime::nls;
  nls.theta = 0.2;
  CHECK_THROWS_AS(derivative_terms(mixed, phi, mm, make_effective_model(nls)), ConfigError);
}

TEST_CASE("derivative total matches a centered difference of alpha along a trajectory") {
  ModelSpec s = grid_spec(2);
  s.V = ExternalPotential{true, 0.5, 0.0, {0.0}, 0.0, 0.0};
  auto mm = make_manybody_model(s);
  auto em = make_effective_model(s);
  auto phi0 = grid_mode(s);
  auto psi0 = product_state(phi0, 2);
  const double dt = 1e-3, T = 0.4;
  auto mb = evolve_manybody(psi0, mm, T, dt, {.stride = 50});
  auto ob = evolve_effective(phi0, em, T, dt, 50).states;
  REQUIRE(mb.size() == ob.size());
  std::vector<double> a;
  for (std::size_t i = 0; i < mb.size(); ++i) a.push_back(alpha(mb[i].psi, make_condensate(ob[i])));
  const double h = 50 * dt;
  for (std::size_t i = 1; i + 1 < mb.size(); ++i) {
    const double fd = (a[i + 1] - a[i - 1]) / (2 * h);
    const auto d = derivative_terms(mb[i], ob[i], mm, em);
    CHECK(std::abs(fd - d.total) <= 2e-2 * std::max(std::abs(d.total), 1e-3));
    CHECK(std::abs(d.total) <= d.I + d.II + d.III + 1e-14);
  }
}

TEST_CASE("gradient of the excited component") {
  ModelSpec s = grid_spec(2);
  const double eps = s.confined.eps;
  auto phi = grid_mode(s, 0);
  auto excited = grid_mode(s, 1);
  const Condensate c = make_condensate(phi);
  const Grid g = s.onebody_grid();
  CHECK(std::abs(grad_q_norm(product_state(phi, 2), c, eps)) < 1e-10);

  ManyBodyState sym{g, symmetrize(tensor_product({nodal(phi.phi()), nodal(excited.phi())})), 0.0};
  // Direct spectral sum for the free kinetic energy of Phi.
  const Eigen::VectorXcd Phi = nodal(phi.Phi);
  const int n = 8;
  const double L = 8.0;
  double kin = 0.0;
  for (int m = 0; m < n; ++m) {
    const int sm = m <= n / 2 ? m : m - n;
    cplx coef = 0.0;
    for (int j = 0; j < n; ++j) coef += Phi(j) * std::polar(1.0, -2 * std::numbers::pi * m * j / n);
    kin += std::pow(2 * std::numbers::pi * sm / L, 2) * std::norm(coef) / n;
  }
  const double gap = (std::pow(2 * std::numbers::pi, 2) - std::pow(std::numbers::pi, 2)) / (eps * eps);
  CHECK(grad_q_norm(sym, c, eps) == doctest::Approx(0.5 * (kin + gap)).epsilon(1e-10));

  // Adding high-frequency content to the excited component raises the value.
  testsupport::Gen gen(151);
  const Tensor base = perturbed_product_state(c, 2, 0.05, gen.engine());
  Eigen::VectorXcd wiggle(g.size());
  for (Index i = 0; i < g.size(); ++i) wiggle(i) = (i / 4) % 2 ? 1.0 : -1.0;
  Tensor bump = tensor_product({nodal(phi.phi()), wiggle});
  bump.data += tensor_product({wiggle, nodal(phi.phi())}).data;
  ManyBodyState lo{g, base, 0.0}, hi{g, base, 0.0};
  hi.psi.data += 0.05 * bump.data;
  CHECK(grad_q_norm(hi, c, eps) > grad_q_norm(lo, c, eps));
}

TEST_CASE("mode projection split") {
  ModelSpec s = grid_spec(2);
  auto phi = grid_mode(s, 0);
  const Grid g = s.onebody_grid();
  const Eigen::VectorXcd u = nodal(phi.phi());
  auto zero = mode_projection_split(product_state(phi, 2), phi);
  CHECK(zero.q_chi < 1e-15);
  CHECK(zero.p_chi_q_Phi < 1e-15);

  const Eigen::VectorXcd chi1 = nodal(grid_mode(s, 1).phi());
  ManyBodyState a{g, symmetrize(tensor_product({chi1, u})), 0.0};
  auto sa = mode_projection_split(a, phi);
  CHECK(sa.q_chi == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sa.p_chi_q_Phi < 1e-14);

  // Free mode orthogonal to Phi in the ground confined mode.
  std::vector<double> c0{0.2}, mom{-0.9};
  GridFunction other = gaussian_packet(free_grid(s.free), 1.4, c0, mom);
  Eigen::VectorXcd o = nodal(other);
  const Eigen::VectorXcd P = nodal(phi.Phi);
  o -= P * P.dot(o);
  o /= o.norm();
  auto perp = make_onebody_state(from_nodal(free_grid(s.free), o), phi.mode);
  ManyBodyState b{g, symmetrize(tensor_product({nodal(perp.phi()), u})), 0.0};
  auto sb = mode_projection_split(b, phi);
  CHECK(sb.q_chi < 1e-14);
  CHECK(sb.p_chi_q_Phi == doctest::Approx(0.5).epsilon(1e-12));

  testsupport::Gen gen(157);
  const Condensate c = make_condensate(phi);
  ManyBodyState r{g, random_symmetric_state(2, g.size(), gen.engine()), 0.0};
  auto sr = mode_projection_split(r, phi);
  CHECK(std::abs(sr.q_chi + sr.p_chi_q_Phi - alpha(r.psi, c)) <= 1e-10);
}

TEST_CASE("operator norm bounds for three profiles") {
  ModelSpec s = grid_spec(2);
  auto phi = grid_mode(s);
  const Condensate c = make_condensate(phi);
  for (auto w : {InteractionProfile{ProfileKind::compact_bump, 2.0, 2.0},
                 InteractionProfile{ProfileKind::gaussian_bump, -1.5, 3.0},
                 InteractionProfile{ProfileKind::tabulated, 1.0, 2.0, {0.0, 1.0, 2.0}, {1.0, -0.5, 0.0}}}) {
    s.w = w;
    auto k = pair_interaction_values(s);
    auto y = young_check(k, c);
    CHECK(y.pair_times_p > 0.0);
    CHECK(y.pair_times_p <= y.pair_times_p_bound + 1e-6);
    CHECK(y.sandwich <= y.sandwich_bound + 1e-6);
  }
  // Power iteration recovers a known norm.
  Eigen::VectorXd diag(5);
  diag << 0.5, -3.0, 1.0, 2.0, 0.1;
  auto A = [&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(diag.cast<cplx>().cwiseProduct(v)); };
  CHECK(operator_norm_estimate(A, A, 5, 300, 3) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("counting report serialization") {
  ModelSpec s = grid_spec(2);
  auto mm = make_manybody_model(s);
  auto em = make_effective_model(s);
  auto phi = grid_mode(s);
  auto r = counting_report(product_state(phi, 2), phi, mm, em);
  CHECK(r.alpha < 1e-14);
  CHECK(r.p_k[0] == doctest::Approx(1.0));
  CHECK(r.trace_distance < 1e-7);
  CHECK(r.E_psi == doctest::Approx(r.E_phi).epsilon(0.5));
  auto j = nlohmann::json::parse(to_json(r));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys.size() == 9);
  for (const char* k : {"t", "alpha", "beta", "beta_tilde", "p_k", "trace_distance", "E_psi", "E_phi", "grad_q_sq"})
    CHECK(j.contains(k));
  CHECK(counting_csv_columns(2).size() == counting_csv_row(r).size());
}
