#include "cmf/bounds.hpp"

#include "cmf/errors.hpp"
#include "cmf/manybody.hpp"
#include "cmf/spectral.hpp"

#include <json.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cmf {
namespace {

using std::numbers::pi;

double norm_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Share of w assigned to the singular part at free distance |x|.
double singular_share(SplitRule rule, double x) {
  switch (rule) {
    case SplitRule::bounded: return 0.0;
    case SplitRule::singular: return 1.0;
    case SplitRule::ball: return x < 1.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": sample counts differ");
}

template <class F>
double gk(F f, double a, double b, double tol = 1e-10) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, tol, &err);
  if (!std::isfinite(v) || err > 1e-9 * std::max(1.0, std::abs(v)))
    throw InvariantError("quadrature did not converge (error estimate " + std::to_string(err) + ")");
  return v;
}

// int_0^1 f(y) dy with y = exp(-u). The integrands here grow at most like
// log(1/y), so the piece y < e^-40 is below 1e-15.
template <class F>
double log_outer(F f) {
  return gk([&f](double u) { return f(std::exp(-u)) * std::exp(-u); }, 0.0, 40.0);
}

}  // namespace

std::vector<double> cumulative_trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  require_same_length(t.size(), y.size(), "cumulative_trapezoid");
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw std::invalid_argument("cumulative_trapezoid: times must increase");
    out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  }
  return out;
}

std::vector<double> gronwall_envelope(const EnvelopeInput& in) {
  if (in.delta < 0.0) throw std::invalid_argument("gronwall_envelope: negative defect");
  const auto I = cumulative_trapezoid(in.times, in.integrand);
  std::vector<double> out(I.size());
  for (std::size_t i = 0; i < I.size(); ++i) {
    const double e = std::exp(I[i]);
    out[i] = e * in.f0 + (e - 1.0) * in.delta;
  }
  return out;
}

InteractionNorms interaction_norms(const ModelSpec& spec) {
  spec.validate();
  if (spec.regime != Regime::hartree) throw ConfigError("interaction_norms: requires theta = 0");
  const InteractionProfile& w = spec.w;
  if (w.kind == ProfileKind::coulomb) throw ConfigError("interaction_norms: coulomb is handled by coulomb_confined_norms");
  const Grid g = spec.onebody_grid();
  const int df = spec.free.dim();
  const double eps = spec.eps();
  const double cell = g.cell_volume();

  auto kernel = [&](auto fn) {
    return PairKernel(g, df, [&](std::span<const double> dx, std::span<const double> dy) {
      std::vector<double> r(dx.begin(), dx.end());
      for (double y : dy) r.push_back(eps * y);
      const double x = norm_of(dx);
      return fn(norm_of(r), x);
    });
  };
  const auto ws = kernel([&](double r, double x) { return singular_share(w.split, x) * w(r); });
  const auto wi = kernel([&](double r, double x) { return (1.0 - singular_share(w.split, x)) * w(r); });
  const auto ds = kernel([&](double r, double x) { return singular_share(w.split, x) * (w(r) - w(x)); });
  const auto di = kernel([&](double r, double x) { return (1.0 - singular_share(w.split, x)) * (w(r) - w(x)); });

  const Grid fg = free_grid(spec.free);
  const PairKernel w0(fg, df, [&](std::span<const double> dx, std::span<const double>) {
    return singular_share(w.split, norm_of(dx)) * w(norm_of(dx));
  });
  const PairKernel w0i(fg, df, [&](std::span<const double> dx, std::span<const double>) {
    return (1.0 - singular_share(w.split, norm_of(dx))) * w(norm_of(dx));
  });

  InteractionNorms out;
  out.w0_s_L1 = w0.values().abs().sum() * fg.cell_volume();
  out.w0_inf_Linf = w0i.values().abs().maxCoeff();
  out.weps_s_L2 = std::sqrt(ws.values().square().sum() * cell);
  out.weps_inf_Linf = wi.values().abs().maxCoeff();
  out.f_eps = std::max(ds.values().abs().sum() * cell, di.values().abs().maxCoeff());
  return out;
}

std::vector<double> thm1_integrand(const InteractionNorms& k, const std::vector<SupNorms>& norms) {
  std::vector<double> out;
  for (const auto& n : norms) out.push_back(4.0 * k.sum() * std::pow(1.0 + n.phi_inf + n.Phi_inf, 2));
  return out;
}

std::vector<double> thm1_coefficient(const InteractionNorms& k, const std::vector<double>& times,
                                     const std::vector<SupNorms>& norms) {
  return cumulative_trapezoid(times, thm1_integrand(k, norms));
}

std::string to_string(RateRegime r) {
  switch (r) {
    case RateRegime::thm1: return "thm1";
    case RateRegime::thm2: return "thm2";
    case RateRegime::thm3: return "thm3";
    case RateRegime::appendixC: return "appendixC";
  }
  return "";
}

RateRegime rate_regime_from(const std::string& s) {
  for (auto r : {RateRegime::thm1, RateRegime::thm2, RateRegime::thm3, RateRegime::appendixC})
    if (to_string(r) == s) return r;
  throw ConfigError("unknown rate regime '" + s + "'");
}

RateExponent rate_exponent(const RateSpec& spec) {
  RateExponent out;
  auto require_s = [&] {
    if (!(spec.s0 > 1.0) || !(spec.s > spec.s0 && spec.s <= 2.0))
      throw ConfigError("rate_exponent: s must lie in (s0, 2]");
  };
  const double r = spec.s / spec.s0;
  switch (spec.regime) {
    case RateRegime::thm1:
      out.eta = 1.0;
      break;
    case RateRegime::thm2:
      require_s();
      out.eta = (r - 1.0) / (2.0 * r - spec.s);
      break;
    case RateRegime::appendixC:
      require_s();
      out.eta = (r - 1.0) / (2.0 * r - 0.5 * spec.s - 1.0);
      break;
    case RateRegime::thm3: {
      const double th = spec.theta;
      if (!(th > 0.25 && th < 1.0 / 3.0)) throw ConfigError("rate_exponent: theta must lie in (1/4, 1/3)");
      if (spec.nu && !(*spec.nu > 0.5 && *spec.nu < th / (1.0 - 2.0 * th)))
        throw ConfigError("rate_exponent: nu must lie in (1/2, theta/(1-2 theta))");
      out.eta = th <= 7.0 / 24.0 ? (4.0 * th - 1.0) / (3.0 - 4.0 * th) : (1.0 - 3.0 * th) / (4.0 - 9.0 * th);
      break;
    }
  }
  out.eta_trace = 0.5 * out.eta;
  return out;
}

std::array<double, 4> thm3_error_exponents(double theta, double nu, double delta) {
  return {-2.0 * theta - nu * (4.0 * theta - 2.0), 0.5 - nu,
          -0.5 + 1.5 * theta + 0.25 * delta - nu * (1.0 - 3.0 * theta), -0.5 * delta};
}

double lp_norm(const Eigen::ArrayXd& w, double cell, double p) {
  return std::pow(w.abs().pow(p).sum() * cell, 1.0 / p);
}

PotentialSplit potential_split(const Eigen::ArrayXd& w, double cell, double c, double s, double s0) {
  if (!(c > 0.0)) throw std::invalid_argument("potential_split: cutoff must be positive");
  if (!(s0 < s && s <= 2.0)) throw std::invalid_argument("potential_split: need s0 < s <= 2");
  PotentialSplit out;
  const auto big = w.abs() > c;
  out.above = big.select(w, 0.0);
  out.below = big.select(0.0, w);
  const double ws = lp_norm(w, cell, s);
  out.above_s0 = lp_norm(out.above, cell, s0);
  out.above_s0_bound = std::pow(c, 1.0 - s / s0) * std::pow(ws, s / s0);
  out.below_L2 = lp_norm(out.below, cell, 2.0);
  out.below_L2_bound = std::pow(c, 1.0 - s / 2.0) * std::pow(ws, s / 2.0);
  return out;
}

Grid cube_grid(double L, int n) {
  Grid g;
  for (int a = 0; a < 3; ++a) g.axes.push_back(Axis{AxisKind::periodic, n, -0.5 * L, 0.5 * L});
  return g;
}

VectorField3 poisson_vector_field(const Grid& cube, const Eigen::ArrayXd& f) {
  if (cube.rank() != 3) throw std::invalid_argument("poisson_vector_field: needs a 3-D grid");
  const int n = cube.axes[0].n;
  const double L = cube.axes[0].length();
  for (const auto& ax : cube.axes)
    if (ax.n != n || ax.length() != L) throw std::invalid_argument("poisson_vector_field: grid must be a cube");
  if (f.size() != cube.size()) throw std::invalid_argument("poisson_vector_field: sample count mismatch");

  const double fmax = f.abs().maxCoeff();
  std::vector<int> idx(3);
  for (Index p = 0; p < f.size(); ++p) {
    cube.unflatten(p, idx);
    const bool edge = std::any_of(idx.begin(), idx.end(), [n](int j) { return j < 2 || j >= n - 2; });
    if (edge && std::abs(f(p)) > 1e-12 * fmax)
      throw GuardError("poisson_vector_field: support touches the padding margin; enlarge the box");
  }

  const int m = 3 * n;
  const double h = L / n;
  const double P = m * h;
  const double R = std::sqrt(3.0) * L;
  const Index total = Index(m) * m * m;
  const std::vector<Index> shape{m, m, m};

  Eigen::VectorXcd F = Eigen::VectorXcd::Zero(total);
  for (Index p = 0; p < f.size(); ++p) {
    cube.unflatten(p, idx);
    F((Index(idx[0]) * m + idx[1]) * m + idx[2]) = f(p);
  }
  fft_nd(F.data(), shape, false);

  Eigen::ArrayXd k(m);
  for (int j = 0; j < m; ++j) k(j) = 2.0 * pi * (j <= m / 2 ? j : j - m) / P;
  // Fourier transform of the Green's function truncated at radius R.
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c) {
        const double k2 = k(a) * k(a) + k(b) * k(b) + k(c) * k(c);
        const double G = k2 == 0.0 ? 0.5 * R * R : 2.0 * std::pow(std::sin(0.5 * R * std::sqrt(k2)), 2) / k2;
        F((Index(a) * m + b) * m + c) *= G;
      }

  VectorField3 out{cube, {}};
  Eigen::VectorXcd work(total);
  for (int comp = 0; comp < 3; ++comp) {
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        for (int c = 0; c < m; ++c) {
          const int j[3] = {a, b, c};
          const Index q = (Index(a) * m + b) * m + c;
          // The Nyquist mode has no consistent derivative.
          const bool nyquist = 2 * j[comp] == m;
          work(q) = nyquist ? cplx(0.0) : cplx(0.0, -k(j[comp])) * F(q);
        }
    fft_nd(work.data(), shape, true);
    out.comp[comp].resize(cube.size());
    for (Index p = 0; p < cube.size(); ++p) {
      cube.unflatten(p, idx);
      out.comp[comp](p) = work((Index(idx[0]) * m + idx[1]) * m + idx[2]).real();
    }
  }
  return out;
}

Eigen::Array<bool, Eigen::Dynamic, 1> interior_mask(const Grid& cube, int layers) {
  Eigen::Array<bool, Eigen::Dynamic, 1> mask(cube.size());
  std::vector<int> idx(cube.rank());
  for (Index p = 0; p < cube.size(); ++p) {
    cube.unflatten(p, idx);
    bool inside = true;
    for (int a = 0; a < cube.rank(); ++a) inside = inside && idx[a] >= layers && idx[a] < cube.axes[a].n - layers;
    mask(p) = inside;
  }
  return mask;
}

Eigen::ArrayXd divergence(const VectorField3& xi, int order) {
  std::vector<double> c;
  switch (order) {
    case 2: c = {1.0 / 2}; break;
    case 4: c = {2.0 / 3, -1.0 / 12}; break;
    case 6: c = {3.0 / 4, -3.0 / 20, 1.0 / 60}; break;
    case 8: c = {4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280}; break;
    default: throw std::invalid_argument("divergence: order must be 2, 4, 6 or 8");
  }
  const Grid& g = xi.grid;
  const int layers = order / 2;
  const auto mask = interior_mask(g, layers);
  const auto shape = g.shape();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(g.size());
  for (int a = 0; a < 3; ++a) {
    Index stride = 1;
    for (int b = a + 1; b < 3; ++b) stride *= shape[b];
    const double h = g.axes[a].spacing();
    for (Index p = 0; p < g.size(); ++p) {
      if (!mask(p)) continue;
      double d = 0.0;
      for (int s = 1; s <= layers; ++s) d += c[s - 1] * (xi.comp[a](p + s * stride) - xi.comp[a](p - s * stride));
      out(p) += d / h;
    }
  }
  return out;
}

Eigen::ArrayXd magnitude(const VectorField3& xi) {
  return (xi.comp[0].square() + xi.comp[1].square() + xi.comp[2].square()).sqrt();
}

CoulombNorms coulomb_confined_norms(double eps) {
  if (!(eps > 0.0 && eps <= 0.5)) throw ConfigError("coulomb_confined_norms: eps must lie in (0, 1/2]");
  CoulombNorms out;
  out.eps = eps;

  // 2 pi int_0^1 r |1/sqrt(r^2 + eps^2 y^2) - 1/r| dr over y in [-1, 1], by symmetry 4 pi over [0, 1].
  // Inner integrals substitute r = a sinh(t), a = eps y, which leaves smooth bounded integrands.
  auto l1_inner = [eps](double y) {
    const double a = eps * y;
    return gk([a](double t) { return a * std::exp(-t); }, 0.0, std::asinh(1.0 / a));
  };
  out.l1_defect = 4.0 * pi * log_outer(l1_inner);
  out.l1_closed_form =
      4.0 * pi * (1.0 + 0.5 * eps - 0.5 * std::sqrt(1.0 + eps * eps) - std::asinh(eps) / (2.0 * eps));

  // sup over r >= 1, y in [0, 1] of 1/r - 1/sqrt(r^2 + eps^2 y^2).
  const int bits = std::numeric_limits<double>::digits / 2;
  auto defect = [eps](double r, double y) { return 1.0 / r - 1.0 / std::sqrt(r * r + eps * eps * y * y); };
  auto best_over_r = [&](double y) {
    auto res = boost::math::tools::brent_find_minima([&](double r) { return -defect(r, y); }, 1.0, 1e3, bits);
    return std::max(-res.second, defect(1.0, y));
  };
  auto res = boost::math::tools::brent_find_minima([&](double y) { return -best_over_r(y); }, 0.0, 1.0, bits);
  out.linf_defect = std::max({-res.second, best_over_r(1.0), best_over_r(0.0)});

  // 2 pi int_{-1}^{1} int_0^1 r / (r^2 + eps^2 y^2) dr dy; the y integrand is log-singular at 0.
  auto log_inner = [eps](double y) {
    const double a = eps * y;
    return gk([](double t) { return std::tanh(t); }, 0.0, std::asinh(1.0 / a));
  };
  out.log_value = 4.0 * pi * log_outer(log_inner);
  return out;
}

double thm2_integrand(const SupNorms& n) { return std::pow(n.phi_H2 + n.phi_inf, 3); }

double thm3_integrand(const SupNorms& n, double density_laplacian, double chi_inf, double V_rate_inf,
                      double V_inf) {
  return chi_inf * chi_inf *
         (n.phi_H2 + n.phi_inf + density_laplacian * n.phi_inf + V_rate_inf + std::sqrt(std::max(V_inf, 0.0)));
}

double fitted_constant(const std::vector<double>& g, const std::vector<double>& measured, double f0,
                       double delta) {
  require_same_length(g.size(), measured.size(), "fitted_constant");
  double C = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (measured[i] <= f0) continue;
    if (!(g[i] > 0.0)) return std::numeric_limits<double>::infinity();
    if (f0 + delta <= 0.0) return std::numeric_limits<double>::infinity();
    C = std::max(C, std::log((measured[i] + delta) / (f0 + delta)) / g[i]);
  }
  return C;
}

std::string BoundReport::to_json() const {
  nlohmann::ordered_json j;
  j["regime"] = regime;
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (const auto& [k, v] : parameters) p[k] = v;
  j["parameters"] = p;
  j["eta"] = eta;
  j["eta_trace"] = eta_trace;
  j["times"] = times;
  j["envelope"] = envelope;
  j["measured"] = measured;
  j["fitted_constant"] = fitted_constant ? nlohmann::ordered_json(*fitted_constant) : nlohmann::ordered_json();
  j["below_envelope"] = below_envelope;
  j["note"] = note;
  return j.dump(2);
}

namespace {

bool all_below(const std::vector<double>& m, const std::vector<double>& env) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] > env[i] * (1.0 + 1e-12) + 1e-15) return false;
  return true;
}

}  // namespace

BoundReport thm1_bound_report(const std::vector<CountingReport>& series, const std::vector<SupNorms>& norms,
                              const InteractionNorms& k, int particles) {
  require_same_length(series.size(), norms.size(), "thm1_bound_report");
  if (series.empty()) throw std::invalid_argument("thm1_bound_report: empty series");
  BoundReport r;
  r.regime = "thm1";
  r.parameters = {{"N", particles}, {"f_eps", k.f_eps}, {"K", k.sum()}};
  RateSpec spec;
  spec.regime = RateRegime::thm1;
  const auto e = rate_exponent(spec);
  r.eta = e.eta;
  r.eta_trace = e.eta_trace;
  for (const auto& c : series) {
    r.times.push_back(c.t);
    r.measured.push_back(c.alpha);
  }
  r.envelope = gronwall_envelope({r.measured.front(), k.f_eps + 1.0 / particles, r.times, thm1_integrand(k, norms)});
  r.below_envelope = all_below(r.measured, r.envelope);
  r.note = "explicit coefficient, no fitted constant";
  return r;
}

BoundReport fitted_bound_report(const RateSpec& spec, const std::vector<double>& times,
                                const std::vector<double>& measured, const std::vector<double>& integrand,
                                double delta, std::optional<double> constant) {
  require_same_length(times.size(), measured.size(), "fitted_bound_report");
  if (times.empty()) throw std::invalid_argument("fitted_bound_report: empty series");
  BoundReport r;
  r.regime = to_string(spec.regime);
  r.parameters = {{"s", spec.s}, {"s0", spec.s0}, {"theta", spec.theta}, {"delta_defect", delta}};
  if (spec.nu) r.parameters.emplace_back("nu", *spec.nu);
  const auto e = rate_exponent(spec);
  r.eta = e.eta;
  r.eta_trace = e.eta_trace;
  r.times = times;
  r.measured = measured;
  const auto g = cumulative_trapezoid(times, integrand);
  const double f0 = measured.front();
  const double fit = fitted_constant(g, measured, f0, delta);
  if (std::isfinite(fit)) r.fitted_constant = fit;
  const double C = constant.value_or(std::isfinite(fit) ? fit : 0.0);
  for (double gi : g) r.envelope.push_back(f0 * std::exp(C * gi) + delta * (std::exp(C * gi) - 1.0));
  r.below_envelope = all_below(measured, r.envelope);
  r.note = "diagnostic with fitted constant";
  if (spec.regime == RateRegime::thm3) r.note += "; h(t) taken equal to g(t)";
  return r;
}

}  // namespace cmf
