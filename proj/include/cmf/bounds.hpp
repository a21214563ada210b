#pragma once

#include "cmf/counting.hpp"
#include "cmf/grid.hpp"
#include "cmf/model.hpp"
#include "cmf/onebody.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace cmf {

// Running trapezoid integral, out[0] = 0.
std::vector<double> cumulative_trapezoid(const std::vector<double>& t, const std::vector<double>& y);

struct EnvelopeInput {
  double f0 = 0.0;
  double delta = 0.0;
  std::vector<double> times;
  std::vector<double> integrand;
};

// e^{I(t)} f0 + (e^{I(t)} - 1) delta with I the running integral of the integrand.
std::vector<double> gronwall_envelope(const EnvelopeInput& in);

// Norms entering the explicit coefficient, measured on the grid for a bounded
// or ball-split profile at theta = 0. The singular part is w restricted to r < 1.
struct InteractionNorms {
  double w0_s_L1 = 0.0;
  double w0_inf_Linf = 0.0;
  double weps_s_L2 = 0.0;
  double weps_inf_Linf = 0.0;
  // max(||w^eps_s - w^0_s||_1, ||w^eps_inf - w^0_inf||_inf) on the relative grid.
  double f_eps = 0.0;

  double sum() const { return w0_s_L1 + w0_inf_Linf + weps_s_L2 + weps_inf_Linf; }
};

InteractionNorms interaction_norms(const ModelSpec& spec);

// C(t) = 4 K int_0^t (1 + ||phi||_inf + ||Phi||_inf)^2 ds.
std::vector<double> thm1_coefficient(const InteractionNorms& k, const std::vector<double>& times,
                                     const std::vector<SupNorms>& norms);
std::vector<double> thm1_integrand(const InteractionNorms& k, const std::vector<SupNorms>& norms);

enum class RateRegime { thm1, thm2, thm3, appendixC };
std::string to_string(RateRegime r);
RateRegime rate_regime_from(const std::string& s);

struct RateSpec {
  RateRegime regime = RateRegime::thm1;
  double s = 2.0;
  double s0 = 1.2;
  double theta = 0.3;
  std::optional<double> nu;
  std::optional<double> delta;
  std::optional<double> vartheta;
};

struct RateExponent {
  double eta = 0.0;
  double eta_trace = 0.0;
};

// Throws ConfigError outside the admissible parameter ranges.
RateExponent rate_exponent(const RateSpec& spec);

// Exponents of N in the four error terms that fix the theta-dependent rate,
// with eps = N^{-nu}: N^{-2theta} eps^{4theta-2}, N^{1/2} eps,
// N^{-1/2 + 3theta/2 + delta/4} eps^{1-3theta}, N^{-delta/2}.
std::array<double, 4> thm3_error_exponents(double theta, double nu, double delta);

struct PotentialSplit {
  Eigen::ArrayXd above;  // w 1{|w| > c}
  Eigen::ArrayXd below;  // w 1{|w| <= c}
  double above_s0 = 0.0;
  double above_s0_bound = 0.0;
  double below_L2 = 0.0;
  double below_L2_bound = 0.0;
};

// Indicator split at level c > 0 of samples with quadrature weight `cell`, and
// the bounds ||above||_{s0} <= c^{1-s/s0} ||w||_s^{s/s0}, ||below||_2 <= c^{1-s/2} ||w||_s^{s/2}.
PotentialSplit potential_split(const Eigen::ArrayXd& w, double cell, double c, double s, double s0 = 1.2);

double lp_norm(const Eigen::ArrayXd& w, double cell, double p);

// Cube [-L/2, L/2)^3 with n nodes per axis.
Grid cube_grid(double L, int n);

struct VectorField3 {
  Grid grid;
  std::array<Eigen::ArrayXd, 3> comp;
};

// xi = -grad Gamma * f with Gamma = 1/(4 pi |x|), so div xi = f. Uses the
// truncated Green's function on a 3x zero-padded grid, truncation radius
// sqrt(3) L. Throws GuardError when f is not negligible in the two outermost layers.
VectorField3 poisson_vector_field(const Grid& cube, const Eigen::ArrayXd& f);

// Central-difference divergence of the given even order; the outermost order/2
// layers are left at zero.
Eigen::ArrayXd divergence(const VectorField3& xi, int order = 8);

// Mask of the nodes where divergence() is defined.
Eigen::Array<bool, Eigen::Dynamic, 1> interior_mask(const Grid& cube, int layers);

// Pointwise |xi|.
Eigen::ArrayXd magnitude(const VectorField3& xi);

struct CoulombNorms {
  double eps = 0.0;
  double l1_defect = 0.0;
  double l1_closed_form = 0.0;
  double linf_defect = 0.0;
  double log_value = 0.0;
};

// Leading constant of l1_defect / eps as eps -> 0.
inline constexpr double kCoulombL1Constant = 2.0 * 3.14159265358979323846;

// For w = 1/|r|, w0 = 1/|x| with x in R^2 and one confined direction y in [-1, 1]:
// L1 defect on B_1 x [-1,1], L-infinity defect on B_1^c x [-1,1], and
// int_{B_1} int_{-1}^{1} 1/(x^2 + eps^2 y^2). Throws InvariantError if a quadrature fails.
CoulombNorms coulomb_confined_norms(double eps);

// g(t) integrands for the fitted-constant regimes.
double thm2_integrand(const SupNorms& n);
double thm3_integrand(const SupNorms& n, double density_laplacian, double chi_inf, double V_rate_inf,
                      double V_inf);

// Smallest C with f0 e^{C g_i} + delta (e^{C g_i} - 1) >= m_i for all samples; 0 if none binds.
double fitted_constant(const std::vector<double>& g, const std::vector<double>& measured, double f0,
                       double delta);

struct BoundReport {
  std::string regime;
  std::vector<std::pair<std::string, double>> parameters;
  double eta = 0.0;
  double eta_trace = 0.0;
  std::vector<double> times;
  std::vector<double> envelope;
  std::vector<double> measured;
  std::optional<double> fitted_constant;
  bool below_envelope = false;
  std::string note;

  std::string to_json() const;
};

// Explicit envelope for alpha with the coefficient C(t) above; no fitted constant.
BoundReport thm1_bound_report(const std::vector<CountingReport>& series, const std::vector<SupNorms>& norms,
                              const InteractionNorms& k, int particles);

// Envelope f0 e^{C g(t)} + delta (e^{C g(t)} - 1) with g the running integral of
// `integrand`. The constant is fitted; if `constant` is given it is used for the
// envelope and the flag, and the fit is still reported.
BoundReport fitted_bound_report(const RateSpec& spec, const std::vector<double>& times,
                                const std::vector<double>& measured, const std::vector<double>& integrand,
                                double delta, std::optional<double> constant = std::nullopt);

}  // namespace cmf
