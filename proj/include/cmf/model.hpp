#pragma once

#include "cmf/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cmf {

enum class ProfileKind { gaussian_bump, compact_bump, coulomb, tabulated };

// Which part of w counts as the singular piece w_s; the rest is w_inf.
enum class SplitRule { bounded, singular, ball };

std::string to_string(ProfileKind k);
ProfileKind profile_kind_from(const std::string& s);
std::string to_string(SplitRule r);
SplitRule split_rule_from(const std::string& s);

// Radial pair interaction w(|r|).
//   gaussian_bump: A exp(-r^2 / (2 sigma^2)), sigma = R/6, cut at R
//   compact_bump:  A (1 - (r/R)^2)^2 for r < R
//   coulomb:       A / r
//   tabulated:     linear interpolation of (table_r, table_w), zero beyond the table
struct InteractionProfile {
  ProfileKind kind = ProfileKind::compact_bump;
  double amplitude = 1.0;
  double support = 1.0;
  std::vector<double> table_r;
  std::vector<double> table_w;
  SplitRule split = SplitRule::bounded;
  double s = 2.0;  // declared L^s exponent of the singular part

  double operator()(double r) const;
  double singular_part(double r) const;
  double bounded_part(double r) const;
  bool compactly_supported() const { return kind != ProfileKind::coulomb; }
  // Radius beyond which w vanishes (infinite for coulomb).
  double reach() const;
  // Integral over R^dim by radial quadrature. Throws for coulomb.
  double integral(int dim) const;
  void validate() const;
};

// Rescales the amplitude so that the integral over R^dim equals mass.
InteractionProfile with_mass(InteractionProfile w, double mass, int dim);

// V(t, x, z) = (1 + a sin(f t)) (omega_x^2 |x - x0|^2 + omega_z^2 |z|^2) / 2,
// x measured by minimum image on the periodic free box, z = eps*y.
struct ExternalPotential {
  bool enabled = false;
  double omega_free = 0.0;
  double omega_confined = 0.0;
  std::vector<double> center;
  double modulation_amplitude = 0.0;
  double modulation_frequency = 0.0;

  bool autonomous() const { return !enabled || modulation_amplitude == 0.0 || modulation_frequency == 0.0; }
  double envelope(double t) const;
  double envelope_rate(double t) const;
  // Static shape at a free displacement dx (already minimum-imaged) and physical z.
  double shape(std::span<const double> dx, std::span<const double> z) const;
};

enum class Regime { hartree, nls };

std::string to_string(Regime r);
Regime regime_from(const std::string& s);

struct ModelSpec {
  int particles = 2;
  double theta = 0.0;
  std::optional<double> nu;
  Regime regime = Regime::hartree;
  InteractionProfile w;
  ExternalPotential V;
  FreeDomain free;
  ConfinedDomain confined;

  double eps() const { return confined.eps; }
  int dim() const { return free.dim() + confined.dim(); }
  // a = eps^{d_c} / N, the small parameter of the theta scaling.
  double scaling_parameter() const;
  Grid onebody_grid() const { return product_grid(free, confined); }
  void validate() const;
};

// Samples V(t, x, eps*y) on a one-body grid whose leading free_dim axes are free.
// With at_zero the confined coordinate is set to 0 (effective potential).
Eigen::ArrayXd sample_potential(const ExternalPotential& V, const Grid& g, int free_dim, double eps, double t,
                                bool at_zero);
Eigen::ArrayXd sample_potential_rate(const ExternalPotential& V, const Grid& g, int free_dim, double eps, double t,
                                     bool at_zero);

// Minimum-image displacement on a periodic axis.
double min_image(double dx, double length);

}  // namespace cmf
