#include "cmf/counting.hpp"

#include "cmf/errors.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace cmf {
namespace {

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_dims(const Tensor& t, const Condensate& c) {
  if (t.dim != c.phi.size()) throw std::invalid_argument("condensate size does not match the tensor basis");
}

// Calls fn(X) for every d x B block that holds particle `particle` as its row index.
template <class Fn>
void for_each_block(Tensor& t, int particle, Fn&& fn) {
  const Index d = t.dim;
  const Index A = ipow(d, particle), B = ipow(d, t.particles - particle - 1);
  for (Index a = 0; a < A; ++a) {
    Eigen::Map<RowMat> X(t.data.data() + a * d * B, d, B);
    fn(X);
  }
}

// Rank-one projection u u^* on one particle, or its complement.
void rank_one(Tensor& t, const Eigen::VectorXcd& u, int particle, bool complement) {
  Eigen::Matrix<cplx, 1, Eigen::Dynamic> row;
  for_each_block(t, particle, [&](Eigen::Map<RowMat>& X) {
    row.noalias() = u.adjoint() * X;
    if (complement)
      X.noalias() -= u * row;
    else
      X.noalias() = u * row;
  });
}

void multiply_particle(Tensor& t, const Eigen::ArrayXd& v, int particle) {
  for_each_block(t, particle, [&](Eigen::Map<RowMat>& X) {
    for (Index r = 0; r < X.rows(); ++r) X.row(r) *= v(r);
  });
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void require_symmetric(const Tensor& t, const char* what) {
  if (transposition_residual(t) > 1e-9 * std::max(1.0, t.norm()))
    throw InvariantError(std::string(what) + ": state is not permutation symmetric");
}

// Applies q on the particles in mask and p on the others.
Tensor pattern(const Tensor& psi, const Condensate& c, unsigned mask) {
  Tensor t = psi;
  for (int i = 0; i < t.particles; ++i) rank_one(t, c.phi, i, (mask >> i) & 1u);
  return t;
}

int popcount(unsigned m) { return __builtin_popcount(m); }

WeightFunction tabulate(int N, WeightTag tag, std::function<double(int)> formula) {
  WeightFunction f;
  f.N = N;
  f.tag = tag;
  f.formula = std::move(formula);
  for (int k = 0; k <= N; ++k) f.values.push_back(f.formula(k));
  return f;
}

double sqrt_fraction(int k, int N) { return k <= 0 ? 0.0 : std::sqrt(double(k) / N); }

}  // namespace

Condensate make_condensate(Eigen::VectorXcd phi) {
  const double n = phi.norm();
  if (!(std::abs(n - 1.0) <= 1e-10))
    throw InvariantError("condensate mode is not normalized: norm - 1 = " + std::to_string(n - 1.0));
  return Condensate{std::move(phi)};
}

Condensate make_condensate(const OneBodyState& s) { return make_condensate(nodal(s.phi())); }

Tensor random_symmetric_state(int particles, Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Tensor t(particles, dim);
  for (Index i = 0; i < t.data.size(); ++i) t.data(i) = cplx(normal(rng), normal(rng));
  return symmetrize(t);
}

Tensor perturbed_product_state(const Condensate& c, int particles, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Tensor t = tensor_power(c.phi, particles);
  for (Index i = 0; i < t.data.size(); ++i) t.data(i) += scale * cplx(normal(rng), normal(rng));
  return symmetrize(t);
}

void apply_p(Tensor& t, const Condensate& c, int particle) {
  check_dims(t, c);
  rank_one(t, c.phi, particle, false);
}

void apply_q(Tensor& t, const Condensate& c, int particle) {
  check_dims(t, c);
  rank_one(t, c.phi, particle, true);
}

WeightFunction weight_sqrt_fraction(int N) {
  return tabulate(N, WeightTag::sqrt_fraction, [N](int k) { return sqrt_fraction(k, N); });
}

WeightFunction weight_fraction(int N) {
  return tabulate(N, WeightTag::fraction, [N](int k) { return double(k) / N; });
}

WeightFunction weight_mu(int N) {
  return tabulate(N, WeightTag::mu, [N](int k) { return N * (sqrt_fraction(k, N) - sqrt_fraction(k - 1, N)); });
}

WeightFunction weight_mu1(int N) {
  return tabulate(N, WeightTag::mu1, [N](int k) { return N * (sqrt_fraction(k, N) - sqrt_fraction(k - 2, N)); });
}

WeightFunction weight_custom(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("weight_custom: no values");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("weight_custom: non-finite value");
  WeightFunction f;
  f.N = static_cast<int>(values.size()) - 1;
  f.values = std::move(values);
  return f;
}

WeightFunction weight_inverse_sqrt_fraction(int N) {
  WeightFunction f = weight_custom(std::vector<double>(N + 1, 0.0));
  for (int k = 1; k <= N; ++k) f.values[k] = std::sqrt(double(N) / k);
  return f;
}

WeightFunction shift(const WeightFunction& f, int j, ShiftRule rule) {
  if (rule == ShiftRule::extend && !f.formula) throw std::invalid_argument("shift: weight has no closed form");
  WeightFunction out = weight_custom(std::vector<double>(f.N + 1, 0.0));
  for (int k = 0; k <= f.N; ++k) {
    const int m = k + j;
    if (m >= 0 && m <= f.N)
      out.values[k] = f.values[m];
    else if (rule == ShiftRule::extend)
      out.values[k] = f.formula(m);
  }
  return out;
}

WeightFunction product(const WeightFunction& f, const WeightFunction& g) {
  if (f.N != g.N) throw std::invalid_argument("product: weights for different N");
  WeightFunction out = weight_custom(f.values);
  for (int k = 0; k <= f.N; ++k) out.values[k] *= g.values[k];
  return out;
}

OccupancyBasis::OccupancyBasis(const Condensate& c) : phi_(c.phi) {
  // Householder reflector with H phi = -e^{i arg phi_0} e_0.
  const double a0 = std::abs(phi_(0));
  const cplx phase = a0 > 0.0 ? phi_(0) / a0 : cplx(1.0);
  v_ = phi_;
  v_(0) += phase * phi_.norm();
  scale_ = 2.0 / v_.squaredNorm();
}

void OccupancyBasis::transform(Tensor& t) const {
  if (t.dim != v_.size()) throw std::invalid_argument("OccupancyBasis: size mismatch");
  Eigen::Matrix<cplx, 1, Eigen::Dynamic> row;
  for (int p = 0; p < t.particles; ++p)
    for_each_block(t, p, [&](Eigen::Map<RowMat>& X) {
      row.noalias() = v_.adjoint() * X;
      X.noalias() -= (scale_ * v_) * row;
    });
}

Eigen::ArrayXi excitation_counts(int particles, Index dim) {
  Eigen::ArrayXi out(ipow(dim, particles));
  std::vector<Index> digit(particles, 0);
  int count = 0;
  for (Index p = 0; p < out.size(); ++p) {
    out(p) = count;
    for (int j = particles - 1; j >= 0; --j) {
      if (digit[j] == 0) ++count;
      if (++digit[j] < dim) break;
      digit[j] = 0;
      --count;
    }
  }
  return out;
}

Tensor hat_apply(const WeightFunction& f, const Tensor& psi, const Condensate& c, HatRoute route) {
  check_dims(psi, c);
  if (f.N != psi.particles) throw std::invalid_argument("hat_apply: weight N does not match the state");
  if (route == HatRoute::occupancy) {
    OccupancyBasis basis(c);
    Tensor t = psi;
    basis.transform(t);
    const Eigen::ArrayXi k = excitation_counts(t.particles, t.dim);
    for (Index i = 0; i < k.size(); ++i) t.data(i) *= f.values[k(i)];
    basis.transform(t);
    return t;
  }
  if (psi.particles > 6) throw std::invalid_argument("hat_apply: pattern route limited to N <= 6");
  Tensor out(psi.particles, psi.dim);
  for (unsigned mask = 0; mask < (1u << psi.particles); ++mask) {
    const double w = f.values[popcount(mask)];
    if (w != 0.0) out.data += w * pattern(psi, c, mask).data;
  }
  return out;
}

Tensor sector_projection(int k, const Tensor& psi, const Condensate& c) {
  WeightFunction f = weight_custom(std::vector<double>(psi.particles + 1, 0.0));
  f.values.at(k) = 1.0;
  return hat_apply(f, psi, c);
}

std::vector<double> occupation_distribution(const Tensor& psi, const Condensate& c, OccupationRoute route) {
  check_dims(psi, c);
  const int N = psi.particles;
  std::vector<double> p(N + 1, 0.0);
  switch (route) {
    case OccupationRoute::occupancy: {
      OccupancyBasis basis(c);
      Tensor t = psi;
      basis.transform(t);
      const Eigen::ArrayXi k = excitation_counts(N, t.dim);
      for (Index i = 0; i < k.size(); ++i) p[k(i)] += std::norm(t.data(i));
      break;
    }
    case OccupationRoute::patterns:
      if (N > 6) throw std::invalid_argument("occupation_distribution: pattern route limited to N <= 6");
      for (unsigned mask = 0; mask < (1u << N); ++mask) p[popcount(mask)] += pattern(psi, c, mask).data.squaredNorm();
      break;
    case OccupationRoute::shortcut:
      require_symmetric(psi, "occupation_distribution");
      for (int k = 0; k <= N; ++k) p[k] = binomial(N, k) * pattern(psi, c, (1u << k) - 1u).data.squaredNorm();
      break;
  }
  return p;
}

double alpha_from_density(const Eigen::MatrixXcd& gamma, const Condensate& c) {
  return 1.0 - c.phi.dot(gamma * c.phi).real();
}

double alpha(const Tensor& psi, const Condensate& c) {
  Tensor t = psi;
  apply_q(t, c, 0);
  return t.data.squaredNorm();
}

double beta(const Tensor& psi, const Condensate& c) {
  const auto p = occupation_distribution(psi, c);
  const int N = psi.particles;
  double b = 0.0;
  for (int k = 0; k <= N; ++k) b += sqrt_fraction(k, N) * p[k];
  return b;
}

double beta_tilde(const Tensor& psi, const Condensate& c, double E_psi, double E_phi) {
  return beta(psi, c) + std::abs(E_psi - E_phi);
}

double trace_distance(const Eigen::MatrixXcd& gamma, const Condensate& c) {
  const Eigen::MatrixXcd diff = gamma - c.phi * c.phi.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

int excited_count(PairProjector q) {
  switch (q) {
    case PairProjector::pp: return 0;
    case PairProjector::qq: return 2;
    default: return 1;
  }
}

void apply_pair_projector(Tensor& t, const Condensate& c, PairProjector q) {
  check_dims(t, c);
  const bool q1 = q == PairProjector::qp || q == PairProjector::qq;
  const bool q2 = q == PairProjector::pq || q == PairProjector::qq;
  rank_one(t, c.phi, 0, q1);
  rank_one(t, c.phi, 1, q2);
}

void apply_pair_multiplier(Tensor& t, const Eigen::MatrixXcd& T) {
  const Index d = t.dim, R = ipow(d, t.particles - 2);
  if (T.rows() != d || T.cols() != d) throw std::invalid_argument("apply_pair_multiplier: size mismatch");
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) t.data.segment((a * d + b) * R, R) *= T(a, b);
}

double shift_identity_residual(const WeightFunction& f, PairProjector left, const Eigen::MatrixXcd& T,
                               PairProjector right, const Tensor& psi, const Condensate& c) {
  auto sandwich = [&](Tensor t) {
    apply_pair_projector(t, c, right);
    apply_pair_multiplier(t, T);
    apply_pair_projector(t, c, left);
    return t;
  };
  const Tensor lhs = hat_apply(f, sandwich(psi), c);
  const Tensor rhs = sandwich(hat_apply(shift(f, excited_count(left) - excited_count(right)), psi, c));
  return (lhs.data - rhs.data).norm();
}

WeightDifference weight_difference_bound(const WeightFunction& m, int l, const Tensor& psi, const Condensate& c) {
  if (l < 0) throw std::invalid_argument("weight_difference_bound: l must be nonnegative");
  const WeightFunction shifted = shift(m, l, ShiftRule::extend);
  WeightFunction diff = weight_custom(m.values);
  for (int k = 0; k <= m.N; ++k) diff.values[k] -= shifted.values[k];
  Tensor t = psi;
  apply_q(t, c, 0);
  return {hat_apply(diff, t, c).norm(), double(l) / m.N};
}

DerivativeTerms derivative_terms(const ManyBodyState& psi, const OneBodyState& phi, const ManyBodyModel& mm,
                                 const EffectiveModel& em) {
  if (em.regime != Regime::hartree || !em.kernel) throw ConfigError("derivative_terms: requires the theta = 0 regime");
  if (mm.particles < 2) throw std::invalid_argument("derivative_terms: needs at least two particles");
  const Condensate c = make_condensate(phi);
  const Index d = mm.grid.size();
  const Index nc = d / em.free.size();

  const Eigen::ArrayXd mean = em.kernel->convolve(phi.Phi.values.array().abs2());
  Eigen::MatrixXcd W = mm.kernel.table().cast<cplx>();
  for (Index a = 0; a < d; ++a) W.row(a).array() -= mean(a / nc);

  auto projected = [&](PairProjector q) {
    Tensor t = psi.psi;
    apply_pair_projector(t, c, q);
    return t;
  };
  const Tensor pp = projected(PairProjector::pp), pq = projected(PairProjector::pq);
  Tensor qp = projected(PairProjector::qp), qq = projected(PairProjector::qq);
  apply_pair_multiplier(qp, W);
  apply_pair_multiplier(qq, W);

  DerivativeTerms out;
  out.I = 2.0 * std::abs(pp.data.dot(qp.data));
  out.II = 2.0 * std::abs(pp.data.dot(qq.data));
  out.III = 2.0 * std::abs(pq.data.dot(qq.data));

  Tensor p1 = psi.psi, q1 = psi.psi;
  apply_p(p1, c, 0);
  apply_q(q1, c, 0);
  Tensor Wq1 = q1;
  apply_pair_multiplier(Wq1, W);
  const double pair_total = -2.0 * p1.data.dot(Wq1.data).imag();

  if (mm.V.enabled) {
    const Eigen::ArrayXd dV = sample_potential(mm.V, mm.grid, mm.free_dim, mm.eps, psi.t, false) -
                              sample_potential(mm.V, mm.grid, mm.free_dim, mm.eps, psi.t, true);
    multiply_particle(q1, dV, 0);
    out.confined_potential = -2.0 * p1.data.dot(q1.data).imag();
  }
  out.total = pair_total + out.confined_potential;
  return out;
}

double grad_q_norm(const ManyBodyState& psi, const Condensate& c, double eps) {
  return grad_q_norm(density_matrix(psi.psi), c, psi.grid, eps);
}

double grad_q_norm(const Eigen::MatrixXcd& gamma, const Condensate& c, const Grid& g, double eps) {
  double e0 = 0.0;
  for (const auto& ax : g.axes)
    if (ax.kind == AxisKind::dirichlet) e0 += std::pow(std::numbers::pi / ax.length(), 2) / (eps * eps);
  const Index d = g.size();
  const Eigen::MatrixXcd q = Eigen::MatrixXcd::Identity(d, d) - c.phi * c.phi.adjoint();
  const Eigen::MatrixXcd shifted = kinetic_matrix(g, eps) - e0 * Eigen::MatrixXcd::Identity(d, d);
  return (q * shifted * q * gamma).trace().real();
}

ModeSplit mode_projection_split(const ManyBodyState& psi, const OneBodyState& phi) {
  const Eigen::VectorXcd chi = nodal(phi.mode.chi);
  const Eigen::VectorXcd Phi = nodal(phi.Phi);
  const Index nc = chi.size(), nf = Phi.size();
  if (nc * nf != psi.psi.dim) throw std::invalid_argument("mode_projection_split: grid mismatch");
  const Index R = ipow(psi.psi.dim, psi.psi.particles - 1);

  Tensor pchi = psi.psi;
  for (Index f = 0; f < nf; ++f) {
    Eigen::Map<RowMat> Y(pchi.data.data() + f * nc * R, nc, R);
    Y = chi * (chi.adjoint() * Y).eval();
  }
  ModeSplit out;
  out.q_chi = (psi.psi.data - pchi.data).squaredNorm();
  Eigen::Map<RowMat> Z(pchi.data.data(), nf, nc * R);
  Z -= Phi * (Phi.adjoint() * Z).eval();
  out.p_chi_q_Phi = pchi.data.squaredNorm();
  return out;
}

double operator_norm_estimate(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& A,
                              const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& A_adj, Index n,
                              int iterations, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(n);
  for (Index i = 0; i < n; ++i) v(i) = cplx(normal(rng), normal(rng));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXcd w = A_adj(A(v));
    lambda = v.dot(w).real();
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

YoungCheck young_check(const PairKernel& w, const Condensate& c, int iterations, std::uint64_t seed) {
  const Grid& g = w.grid();
  const Index d = g.size();
  if (c.phi.size() != d) throw std::invalid_argument("young_check: condensate size mismatch");
  const Eigen::MatrixXcd T = w.table().cast<cplx>();
  const double cell = g.cell_volume();
  const double phi_inf = c.phi.cwiseAbs().maxCoeff() / std::sqrt(cell);
  const double w_l2 = std::sqrt(w.values().square().sum() * cell);
  const double w_l1 = w.values().abs().sum() * cell;

  auto as_tensor = [d](const Eigen::VectorXcd& v) { return Tensor(2, d, v); };
  auto wp = [&](const Eigen::VectorXcd& v) {
    Tensor t = as_tensor(v);
    apply_p(t, c, 0);
    apply_pair_multiplier(t, T);
    return Eigen::VectorXcd(t.data);
  };
  auto pw = [&](const Eigen::VectorXcd& v) {
    Tensor t = as_tensor(v);
    apply_pair_multiplier(t, T);
    apply_p(t, c, 0);
    return Eigen::VectorXcd(t.data);
  };

  YoungCheck out;
  out.pair_times_p = operator_norm_estimate(wp, pw, d * d, iterations, seed);
  out.pair_times_p_bound = w_l2 * phi_inf;
  auto sandwich = [&](const Eigen::VectorXcd& v) {
    Tensor t = as_tensor(v);
    apply_p(t, c, 0);
    apply_pair_multiplier(t, T);
    apply_p(t, c, 0);
    return Eigen::VectorXcd(t.data);
  };
  out.sandwich = operator_norm_estimate(sandwich, sandwich, d * d, iterations, seed + 1);
  out.sandwich_bound = w_l1 * phi_inf * phi_inf;
  return out;
}

CountingReport counting_report(const ManyBodyState& psi, const OneBodyState& phi, const ManyBodyModel& mm,
                               const EffectiveModel& em) {
  const Condensate c = make_condensate(phi);
  CountingReport r;
  r.t = psi.t;
  r.p_k = occupation_distribution(psi.psi, c);
  const int N = psi.psi.particles;
  for (int k = 0; k <= N; ++k) {
    r.alpha += double(k) / N * r.p_k[k];
    r.beta += sqrt_fraction(k, N) * r.p_k[k];
  }
  const Eigen::MatrixXcd gamma = density_matrix(psi.psi);
  r.E_psi = manybody_energy(psi, mm, gamma);
  r.E_phi = effective_energy(phi, em);
  r.beta_tilde = r.beta + std::abs(r.E_psi - r.E_phi);
  r.trace_distance = trace_distance(gamma, c);
  r.grad_q_sq = grad_q_norm(gamma, c, psi.grid, mm.eps);
  return r;
}

std::string to_json(const CountingReport& r) {
  nlohmann::ordered_json j;
  j["t"] = r.t;
  j["alpha"] = r.alpha;
  j["beta"] = r.beta;
  j["beta_tilde"] = r.beta_tilde;
  j["p_k"] = r.p_k;
  j["trace_distance"] = r.trace_distance;
  j["E_psi"] = r.E_psi;
  j["E_phi"] = r.E_phi;
  j["grad_q_sq"] = r.grad_q_sq;
  return j.dump();
}

std::vector<std::string> counting_csv_columns(int particles) {
  std::vector<std::string> cols{"t", "alpha", "beta", "beta_tilde"};
  for (int k = 0; k <= particles; ++k) cols.push_back("p_" + std::to_string(k));
  for (const char* s : {"trace_distance", "E_psi", "E_phi", "grad_q_sq"}) cols.emplace_back(s);
  return cols;
}

std::vector<double> counting_csv_row(const CountingReport& r) {
  std::vector<double> row{r.t, r.alpha, r.beta, r.beta_tilde};
  row.insert(row.end(), r.p_k.begin(), r.p_k.end());
  for (double v : {r.trace_distance, r.E_psi, r.E_phi, r.grad_q_sq}) row.push_back(v);
  return row;
}

}  // namespace cmf
