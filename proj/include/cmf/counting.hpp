#pragma once

#include "cmf/manybody.hpp"
#include "cmf/onebody.hpp"
#include "cmf/tensor.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cmf {

// Normalized reference mode in the nodal basis. p = |phi><phi| on one particle.
struct Condensate {
  Eigen::VectorXcd phi;
};

// Throws InvariantError unless | ||phi|| - 1 | <= 1e-10.
Condensate make_condensate(Eigen::VectorXcd phi);
Condensate make_condensate(const OneBodyState& s);

// Symmetrized complex Gaussian tensor, normalized.
Tensor random_symmetric_state(int particles, Index dim, std::mt19937_64& rng);
// Symmetrized phi^{(N)} + scale * (Gaussian tensor), normalized; scale controls alpha.
Tensor perturbed_product_state(const Condensate& c, int particles, double scale, std::mt19937_64& rng);

// p_j and q_j = 1 - p_j applied in place to one particle.
void apply_p(Tensor& t, const Condensate& c, int particle);
void apply_q(Tensor& t, const Condensate& c, int particle);

enum class WeightTag { sqrt_fraction, fraction, mu, mu1, custom };

// f(0..N). Out-of-range shifts read 0 unless `extend` is requested and the
// weight has a closed form, in which case the formula is evaluated.
struct WeightFunction {
  int N = 0;
  std::vector<double> values;
  WeightTag tag = WeightTag::custom;
  std::function<double(int)> formula;

  double operator()(int k) const { return values.at(static_cast<std::size_t>(k)); }
};

WeightFunction weight_sqrt_fraction(int N);  // sqrt(k/N)
WeightFunction weight_fraction(int N);       // k/N
WeightFunction weight_mu(int N);             // N (n(k) - n(k-1))
WeightFunction weight_mu1(int N);            // N (n(k) - n(k-2))
WeightFunction weight_custom(std::vector<double> values);
// (n^{-1})(k) = sqrt(N/k) with the k = 0 entry set to 0.
WeightFunction weight_inverse_sqrt_fraction(int N);

enum class ShiftRule { zero, extend };
// (tau_j f)(k) = f(k + j).
WeightFunction shift(const WeightFunction& f, int j, ShiftRule rule = ShiftRule::zero);
WeightFunction product(const WeightFunction& f, const WeightFunction& g);

// Number of particles outside phi for each basis multi-index after the basis
// change that sends phi to the first basis vector.
class OccupancyBasis {
 public:
  explicit OccupancyBasis(const Condensate& c);
  // In-place change to (and back from, the map is an involution) the basis
  // whose first vector is phi up to a phase.
  void transform(Tensor& t) const;
  const Eigen::VectorXcd& phi() const { return phi_; }

 private:
  Eigen::VectorXcd phi_;
  Eigen::VectorXcd v_;
  double scale_ = 0.0;
};

// Excitation count per flat index of a tensor in the occupancy basis.
Eigen::ArrayXi excitation_counts(int particles, Index dim);

enum class HatRoute { occupancy, patterns };

// sum_k f(k) P_{k,N} psi.
Tensor hat_apply(const WeightFunction& f, const Tensor& psi, const Condensate& c, HatRoute route = HatRoute::occupancy);
// P_{k,N} psi.
Tensor sector_projection(int k, const Tensor& psi, const Condensate& c);

enum class OccupationRoute { occupancy, patterns, shortcut };

// p(k) = <psi, P_{k,N} psi>. The shortcut route requires a symmetric state.
std::vector<double> occupation_distribution(const Tensor& psi, const Condensate& c,
                                            OccupationRoute route = OccupationRoute::occupancy);

// 1 - <phi, gamma phi>.
double alpha_from_density(const Eigen::MatrixXcd& gamma, const Condensate& c);
// <psi, q_1 psi>.
double alpha(const Tensor& psi, const Condensate& c);
double beta(const Tensor& psi, const Condensate& c);
double beta_tilde(const Tensor& psi, const Condensate& c, double E_psi, double E_phi);

// Tr |gamma - |phi><phi||.
double trace_distance(const Eigen::MatrixXcd& gamma, const Condensate& c);

enum class PairProjector { pp, pq, qp, qq };
int excited_count(PairProjector q);
void apply_pair_projector(Tensor& t, const Condensate& c, PairProjector q);

// Multiplication by T(x_1, x_2) on the first two particles.
void apply_pair_multiplier(Tensor& t, const Eigen::MatrixXcd& T);

// || f^ Q_j T Q_k psi - Q_j T Q_k (tau_{j-k} f)^ psi ||.
double shift_identity_residual(const WeightFunction& f, PairProjector left, const Eigen::MatrixXcd& T,
                               PairProjector right, const Tensor& psi, const Condensate& c);

struct WeightDifference {
  double lhs = 0.0;
  double rhs = 0.0;
};
// || (m^ - (tau_l m)^) q_1 psi || against l/N; m must have a closed form.
WeightDifference weight_difference_bound(const WeightFunction& m, int l, const Tensor& psi, const Condensate& c);

// Terms of the alpha derivative for the theta = 0 dynamics. The pair operator is
// W = w(r_1 - r_2) - (w0 * |Phi|^2)(x_1). `total` is d alpha/dt, including the
// contribution of V(x, eps y) - V(x, 0) on particle 1.
struct DerivativeTerms {
  double I = 0.0;
  double II = 0.0;
  double III = 0.0;
  double confined_potential = 0.0;
  double total = 0.0;
};
DerivativeTerms derivative_terms(const ManyBodyState& psi, const OneBodyState& phi, const ManyBodyModel& mm,
                                 const EffectiveModel& em);

// <q_1 psi, (-Lap_x - eps^-2 Lap_y - E_0 eps^-2)_1 q_1 psi>.
double grad_q_norm(const ManyBodyState& psi, const Condensate& c, double eps);
// Same, from the one-body density matrix of psi on grid g.
double grad_q_norm(const Eigen::MatrixXcd& gamma, const Condensate& c, const Grid& g, double eps);

// Squared norms of q^chi_1 psi and p^chi_1 q^Phi_1 psi for phi = Phi (x) chi.
struct ModeSplit {
  double q_chi = 0.0;
  double p_chi_q_Phi = 0.0;
};
ModeSplit mode_projection_split(const ManyBodyState& psi, const OneBodyState& phi);

// Largest singular value of a linear map on C^n by power iteration on A^* A.
double operator_norm_estimate(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& A,
                              const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& A_adj, Index n,
                              int iterations, std::uint64_t seed);

// ||w_12 p_1||_Op and ||p_1 w_12 p_1||_Op on two-particle grid states against
// ||w||_2 ||phi||_inf and ||w||_1 ||phi||_inf^2 on the relative grid.
struct YoungCheck {
  double pair_times_p = 0.0;
  double pair_times_p_bound = 0.0;
  double sandwich = 0.0;
  double sandwich_bound = 0.0;
};
YoungCheck young_check(const PairKernel& w, const Condensate& c, int iterations = 200, std::uint64_t seed = 1);

struct CountingReport {
  double t = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double beta_tilde = 0.0;
  std::vector<double> p_k;
  double trace_distance = 0.0;
  double E_psi = 0.0;
  double E_phi = 0.0;
  double grad_q_sq = 0.0;
};

CountingReport counting_report(const ManyBodyState& psi, const OneBodyState& phi, const ManyBodyModel& mm,
                               const EffectiveModel& em);

std::string to_json(const CountingReport& r);
std::vector<std::string> counting_csv_columns(int particles);
std::vector<double> counting_csv_row(const CountingReport& r);

}  // namespace cmf
