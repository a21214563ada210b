#pragma once

#include "cmf/grid.hpp"
#include "cmf/model.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace cmf {

// Dirichlet eigenmode on the confined rectangle.
struct ConfinedMode {
  int index = 0;
  std::vector<int> axis_modes;  // 0 = ground mode along that axis
  GridFunction chi;
  double E = 0.0;  // eigenvalue of -Delta_y
  double eps = 1.0;

  double E_eps() const { return E / (eps * eps); }
  double sup_norm() const { return chi.sup_norm(); }
};

// Modes are ordered by eigenvalue, ties broken lexicographically in the
// per-axis indices. Requires every per-axis index below n_c - 1.
ConfinedMode chi_mode(const ConfinedDomain& d, int m);

// Integral of |chi|^4 over the confined grid.
double quartic_integral(const ConfinedMode& chi);

double coupling_b(const InteractionProfile& w, const ConfinedMode& chi0, int dim);
double coupling_b(double w_integral, const ConfinedMode& chi0);

enum class ConvolutionMode { periodic, zero_padded };

// Convolution with w0 on the free grid. Periodic mode uses minimum-image
// offsets, matching the many-body pair kernel; zero_padded doubles every
// axis so no wraparound occurs.
class HartreeKernel {
 public:
  HartreeKernel(const Grid& free, const std::function<double(std::span<const double>)>& w0, double reach,
                ConvolutionMode mode);

  Eigen::ArrayXd convolve(const Eigen::ArrayXd& density) const;
  ConvolutionMode mode() const { return mode_; }
  const Grid& grid() const { return free_; }
  // Cell-weighted sum of the sampled kernel.
  double sampled_integral() const { return integral_; }

 private:
  Grid free_;
  ConvolutionMode mode_;
  std::vector<Index> shape_;
  Eigen::VectorXcd kernel_hat_;
  double integral_ = 0.0;
};

// w0(x) = w(|x|), the interaction restricted to zero confined separation.
HartreeKernel hartree_kernel(const InteractionProfile& w, const Grid& free,
                             ConvolutionMode mode = ConvolutionMode::periodic);

GridFunction hartree_potential(const GridFunction& Phi, const HartreeKernel& k);

struct EffectiveModel {
  Regime regime = Regime::hartree;
  Grid free;
  int free_dim = 1;
  double eps = 1.0;
  ExternalPotential V;
  std::optional<HartreeKernel> kernel;  // hartree regime
  double b = 0.0;                       // nls regime
  ConfinedMode mode;
};

// The nls coupling uses the radial integral of w over R^{d_f + d_c} unless
// w_integral is supplied.
EffectiveModel make_effective_model(const ModelSpec& spec, int mode_index = 0,
                                    ConvolutionMode conv = ConvolutionMode::periodic,
                                    std::optional<double> w_integral = std::nullopt);

struct OneBodyState {
  GridFunction Phi;  // on the free grid
  ConfinedMode mode;
  double t = 0.0;

  // Phi(x) chi(y) exp(-i E^eps t) on the product grid.
  GridFunction phi() const;
};

// Validates the normalization of Phi.
OneBodyState make_onebody_state(GridFunction Phi, ConfinedMode mode, double t = 0.0);

// Normalized Gaussian exp(-|x-x0|^2 / (4 sigma^2) + i k.x) on the free grid.
GridFunction gaussian_packet(const Grid& free, double sigma, std::span<const double> center,
                             std::span<const double> momentum);

// Pointwise potential acting on Phi at time t: V(t,x,0) plus the nonlinearity.
Eigen::ArrayXd effective_potential(const GridFunction& Phi, const EffectiveModel& m, double t);

struct Trajectory {
  std::vector<OneBodyState> states;
};

// Strang splitting, half kinetic / potential phase / half kinetic.
// T may be negative for backward evolution; |T|/dt must be an integer.
Trajectory evolve_effective(const OneBodyState& s0, const EffectiveModel& m, double T, double dt, int stride = 1);

double effective_energy(const OneBodyState& s, const EffectiveModel& m);

struct SupNorms {
  double phi_inf = 0.0;
  double Phi_inf = 0.0;
  double phi_H2 = 0.0;
  double lap_Phi_L2 = 0.0;
};

SupNorms sup_norms(const OneBodyState& s);

// ||Delta |phi|^2||_2 on the product grid, by the product rule.
double density_laplacian_l2(const OneBodyState& s);

// Number of steps for horizon T at step dt; throws unless |T|/dt is integral.
long step_count(double T, double dt);

}  // namespace cmf
