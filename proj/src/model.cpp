#include "cmf/model.hpp"

#include "cmf/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cmf {
namespace {

double unit_sphere_area(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    case 4: return 2.0 * std::numbers::pi * std::numbers::pi;
    default: throw std::invalid_argument("unsupported dimension");
  }
}

}  // namespace

std::string to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::gaussian_bump: return "gaussian-bump";
    case ProfileKind::compact_bump: return "compact-polynomial-bump";
    case ProfileKind::coulomb: return "coulomb";
    case ProfileKind::tabulated: return "tabulated";
  }
  return "?";
}

ProfileKind profile_kind_from(const std::string& s) {
  if (s == "gaussian-bump") return ProfileKind::gaussian_bump;
  if (s == "compact-polynomial-bump") return ProfileKind::compact_bump;
  if (s == "coulomb") return ProfileKind::coulomb;
  if (s == "tabulated") return ProfileKind::tabulated;
  throw ConfigError("unknown interaction kind '" + s + "'");
}

std::string to_string(SplitRule r) {
  switch (r) {
    case SplitRule::bounded: return "bounded";
    case SplitRule::singular: return "singular";
    case SplitRule::ball: return "ball";
  }
  return "?";
}

SplitRule split_rule_from(const std::string& s) {
  if (s == "bounded") return SplitRule::bounded;
  if (s == "singular") return SplitRule::singular;
  if (s == "ball") return SplitRule::ball;
  throw ConfigError("unknown split rule '" + s + "'");
}

std::string to_string(Regime r) { return r == Regime::hartree ? "hartree" : "nls"; }

Regime regime_from(const std::string& s) {
  if (s == "hartree") return Regime::hartree;
  if (s == "nls") return Regime::nls;
  throw ConfigError("unknown regime '" + s + "'");
}

double InteractionProfile::operator()(double r) const {
  r = std::abs(r);
  switch (kind) {
    case ProfileKind::gaussian_bump: {
      if (r >= support) return 0.0;
      const double sigma = support / 6.0;
      return amplitude * std::exp(-r * r / (2.0 * sigma * sigma));
    }
    case ProfileKind::compact_bump: {
      if (r >= support) return 0.0;
      const double u = 1.0 - (r / support) * (r / support);
      return amplitude * u * u;
    }
    case ProfileKind::coulomb:
      return r == 0.0 ? std::numeric_limits<double>::infinity() : amplitude / r;
    case ProfileKind::tabulated: {
      if (table_r.empty() || r >= table_r.back()) return 0.0;
      if (r <= table_r.front()) return amplitude * table_w.front();
      const auto it = std::upper_bound(table_r.begin(), table_r.end(), r);
      const std::size_t i = static_cast<std::size_t>(it - table_r.begin());
      const double t = (r - table_r[i - 1]) / (table_r[i] - table_r[i - 1]);
      return amplitude * ((1.0 - t) * table_w[i - 1] + t * table_w[i]);
    }
  }
  return 0.0;
}

double InteractionProfile::singular_part(double r) const {
  switch (split) {
    case SplitRule::bounded: return 0.0;
    case SplitRule::singular: return (*this)(r);
    case SplitRule::ball: return std::abs(r) < 1.0 ? (*this)(r) : 0.0;
  }
  return 0.0;
}

double InteractionProfile::bounded_part(double r) const {
  switch (split) {
    case SplitRule::bounded: return (*this)(r);
    case SplitRule::singular: return 0.0;
    case SplitRule::ball: return std::abs(r) < 1.0 ? 0.0 : (*this)(r);
  }
  return 0.0;
}

double InteractionProfile::reach() const {
  switch (kind) {
    case ProfileKind::coulomb: return std::numeric_limits<double>::infinity();
    case ProfileKind::tabulated: return table_r.empty() ? 0.0 : table_r.back();
    default: return support;
  }
}

double InteractionProfile::integral(int dim) const {
  if (kind == ProfileKind::coulomb) throw std::invalid_argument("coulomb interaction is not integrable");
  using boost::math::quadrature::gauss_kronrod;
  auto radial = [&](double r) { return (*this)(r)*std::pow(r, dim - 1); };
  double total = 0.0;
  if (kind == ProfileKind::tabulated) {
    for (std::size_t i = 0; i + 1 < table_r.size(); ++i)
      total += gauss_kronrod<double, 15>::integrate(radial, table_r[i], table_r[i + 1], 8, 1e-14);
    if (!table_r.empty() && table_r.front() > 0.0)
      total += gauss_kronrod<double, 15>::integrate(radial, 0.0, table_r.front(), 8, 1e-14);
  } else {
    total = gauss_kronrod<double, 31>::integrate(radial, 0.0, support, 12, 1e-14);
  }
  return unit_sphere_area(dim) * total;
}

void InteractionProfile::validate() const {
  if (!std::isfinite(amplitude)) throw ConfigError("interaction amplitude must be finite");
  if (kind != ProfileKind::tabulated && kind != ProfileKind::coulomb && !(support > 0.0))
    throw ConfigError("interaction support radius must be positive");
  if (kind == ProfileKind::tabulated) {
    if (table_r.size() < 2 || table_r.size() != table_w.size())
      throw ConfigError("tabulated interaction needs matching r and w tables of length >= 2");
    if (!std::is_sorted(table_r.begin(), table_r.end()) || table_r.front() < 0.0)
      throw ConfigError("tabulated radii must be nonnegative and increasing");
  }
  if (kind == ProfileKind::coulomb && split == SplitRule::bounded)
    throw ConfigError("coulomb interaction has no bounded split; use 'ball' or 'singular'");
  if (!(s >= 1.0)) throw ConfigError("declared exponent s must be >= 1");
}

InteractionProfile with_mass(InteractionProfile w, double mass, int dim) {
  const double current = w.integral(dim);
  if (current == 0.0) throw std::invalid_argument("cannot normalize an interaction with zero integral");
  w.amplitude *= mass / current;
  return w;
}

double ExternalPotential::envelope(double t) const {
  return 1.0 + modulation_amplitude * std::sin(modulation_frequency * t);
}

double ExternalPotential::envelope_rate(double t) const {
  return modulation_amplitude * modulation_frequency * std::cos(modulation_frequency * t);
}

double ExternalPotential::shape(std::span<const double> dx, std::span<const double> z) const {
  if (!enabled) return 0.0;
  double x2 = 0.0, z2 = 0.0;
  for (double v : dx) x2 += v * v;
  for (double v : z) z2 += v * v;
  return 0.5 * (omega_free * omega_free * x2 + omega_confined * omega_confined * z2);
}

double min_image(double dx, double length) { return dx - length * std::nearbyint(dx / length); }

namespace {

Eigen::ArrayXd sample_shape(const ExternalPotential& V, const Grid& g, int free_dim, double eps, bool at_zero) {
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(g.size());
  if (!V.enabled) return out;
  std::vector<int> idx(g.rank());
  std::vector<double> dx(free_dim), z(g.rank() - free_dim);
  for (Index p = 0; p < g.size(); ++p) {
    g.unflatten(p, idx);
    for (int a = 0; a < free_dim; ++a) {
      const double c = a < static_cast<int>(V.center.size()) ? V.center[a] : 0.0;
      dx[a] = min_image(g.axes[a].node(idx[a]) - c, g.axes[a].length());
    }
    for (int a = free_dim; a < g.rank(); ++a) z[a - free_dim] = at_zero ? 0.0 : eps * g.axes[a].node(idx[a]);
    out(p) = V.shape(dx, z);
  }
  return out;
}

}  // namespace

Eigen::ArrayXd sample_potential(const ExternalPotential& V, const Grid& g, int free_dim, double eps, double t,
                                bool at_zero) {
  return V.envelope(t) * sample_shape(V, g, free_dim, eps, at_zero);
}

Eigen::ArrayXd sample_potential_rate(const ExternalPotential& V, const Grid& g, int free_dim, double eps, double t,
                                     bool at_zero) {
  return V.envelope_rate(t) * sample_shape(V, g, free_dim, eps, at_zero);
}

double ModelSpec::scaling_parameter() const { return std::pow(eps(), confined.dim()) / particles; }

void ModelSpec::validate() const {
  try {
    free.validate();
    confined.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  w.validate();
  if (particles < 1) throw ConfigError("particle count must be >= 1");
  if (regime == Regime::hartree && theta != 0.0) throw ConfigError("hartree regime requires theta = 0");
  if (regime == Regime::nls && !(theta > 0.0 && theta < 1.0)) throw ConfigError("nls regime requires theta in (0,1)");
  if (nu && !(*nu > 0.0)) throw ConfigError("nu must be positive");
}

}  // namespace cmf
