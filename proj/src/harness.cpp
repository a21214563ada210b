#include "cmf/harness.hpp"

#include "cmf/errors.hpp"
#include "cmf/io.hpp"
#include "cmf/tensor.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace cmf {
namespace {

using Json = nlohmann::ordered_json;

// Typed access to one JSON object; unread keys are rejected by finish().
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  T get(const char* key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(path_ + ": unknown key '" + k + "'");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json();
}

std::string write_json(const Json& j) { return j.dump(2) + "\n"; }

Snapshot snapshot_of(const Grid& g, int particles, double eps, double t, const Eigen::VectorXcd& coeffs) {
  Snapshot s;
  s.grid = g;
  s.particles = particles;
  s.eps = eps;
  s.time = t;
  s.values = coeffs / std::sqrt(std::pow(g.cell_volume(), particles));
  return s;
}

double max_abs(const Eigen::ArrayXd& a) { return a.size() ? a.abs().maxCoeff() : 0.0; }

std::string format_step(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

}  // namespace

double LadderSpec::eps_for(std::size_t i) const {
  if (nu) return std::pow(static_cast<double>(particles.at(i)), -*nu);
  if (eps.size() == 1) return eps.front();
  return eps.at(i);
}

void ExperimentConfig::validate() const {
  model.validate();
  if (!(T > 0.0)) throw ConfigError("time horizon T must be positive");
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  try {
    step_count(T, dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("time grid: ") + e.what());
  }
  if (stride < 1) throw ConfigError("report stride must be >= 1");
  if (ladder.particles.empty()) throw ConfigError("ladder must list at least one particle number");
  for (int n : ladder.particles)
    if (n < 1) throw ConfigError("ladder particle numbers must be >= 1");
  if (ladder.nu && !ladder.eps.empty()) throw ConfigError("ladder takes either nu or an eps list, not both");
  if (ladder.nu && !(*ladder.nu > 0.0)) throw ConfigError("ladder nu must be positive");
  if (!ladder.nu && ladder.eps.size() != 1 && ladder.eps.size() != ladder.particles.size())
    throw ConfigError("ladder eps list must have one entry or one per particle number");
  for (double e : ladder.eps)
    if (!(e > 0.0)) throw ConfigError("ladder eps values must be positive");
  if (ladder.functional != "beta" && ladder.functional != "alpha")
    throw ConfigError("ladder functional must be 'beta' or 'alpha'");
  if (!(ladder.residual_threshold > 0.0)) throw ConfigError("ladder residual threshold must be positive");
  const auto df = static_cast<std::size_t>(model.free.dim());
  if (!initial.center.empty() && initial.center.size() != df)
    throw ConfigError("initial center needs one entry per free axis");
  if (!initial.momentum.empty() && initial.momentum.size() != df)
    throw ConfigError("initial momentum needs one entry per free axis");
  if (!(initial.sigma > 0.0)) throw ConfigError("initial sigma must be positive");
  if (initial.mode_index < 0) throw ConfigError("initial mode index must be >= 0");
  if (memory_cap == 0) throw ConfigError("memory cap must be positive");
}

ExperimentConfig parse_config(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "config");

  Section m = top.sub("model");
  ModelSpec& s = c.model;
  s.particles = m.get("particles", s.particles);
  s.theta = m.get("theta", s.theta);
  if (m.has("nu")) s.nu = m.get("nu", 0.0);
  s.regime = regime_from(m.get<std::string>("regime", to_string(s.regime)));

  Section w = m.sub("interaction");
  s.w.kind = profile_kind_from(w.get<std::string>("kind", to_string(s.w.kind)));
  s.w.amplitude = w.get("amplitude", s.w.amplitude);
  s.w.support = w.get("support", s.w.support);
  s.w.table_r = w.get("table_r", s.w.table_r);
  s.w.table_w = w.get("table_w", s.w.table_w);
  s.w.split = split_rule_from(w.get<std::string>("split", to_string(s.w.split)));
  s.w.s = w.get("s", s.w.s);
  w.finish();

  Section v = m.sub("potential");
  s.V.enabled = v.get("enabled", s.V.enabled);
  s.V.omega_free = v.get("omega_free", s.V.omega_free);
  s.V.omega_confined = v.get("omega_confined", s.V.omega_confined);
  s.V.center = v.get("center", s.V.center);
  s.V.modulation_amplitude = v.get("modulation_amplitude", s.V.modulation_amplitude);
  s.V.modulation_frequency = v.get("modulation_frequency", s.V.modulation_frequency);
  v.finish();

  Section f = m.sub("free");
  s.free.extent = f.get("extent", std::vector<double>{8.0});
  s.free.points = f.get("points", std::vector<int>{32});
  f.finish();

  Section cd = m.sub("confined");
  s.confined.lo = cd.get("lo", std::vector<double>{-0.5});
  s.confined.hi = cd.get("hi", std::vector<double>{0.5});
  s.confined.points = cd.get("points", std::vector<int>{16});
  s.confined.eps = cd.get("eps", 1.0);
  cd.finish();
  m.finish();

  Section in = top.sub("initial");
  c.initial.sigma = in.get("sigma", c.initial.sigma);
  c.initial.center = in.get("center", c.initial.center);
  c.initial.momentum = in.get("momentum", c.initial.momentum);
  c.initial.mode_index = in.get("mode_index", c.initial.mode_index);
  in.finish();

  Section t = top.sub("time");
  c.T = t.get("T", c.T);
  c.dt = t.get("dt", c.dt);
  c.stride = t.get("stride", c.stride);
  t.finish();

  Section l = top.sub("ladder");
  c.ladder.particles = l.get("particles", std::vector<int>{s.particles});
  if (l.has("nu")) c.ladder.nu = l.get("nu", 0.0);
  c.ladder.eps = l.get("eps", std::vector<double>{});
  if (!c.ladder.nu && c.ladder.eps.empty()) c.ladder.eps = {s.confined.eps};
  c.ladder.functional = l.get("functional", c.ladder.functional);
  c.ladder.residual_threshold = l.get("residual_threshold", c.ladder.residual_threshold);
  l.finish();

  if (top.has("rate")) {
    Section r = top.sub("rate");
    RateSpec rs;
    rs.regime = rate_regime_from(r.get<std::string>("regime", "thm1"));
    rs.s = r.get("s", rs.s);
    rs.s0 = r.get("s0", rs.s0);
    rs.theta = r.get("theta", s.theta);
    if (r.has("nu")) rs.nu = r.get("nu", 0.0);
    if (r.has("delta")) rs.delta = r.get("delta", 0.0);
    if (r.has("vartheta")) rs.vartheta = r.get("vartheta", 0.0);
    r.finish();
    c.rate = rs;
  }

  Section o = top.sub("output");
  c.out_dir = o.get<std::string>("dir", c.out_dir.string());
  o.finish();

  c.seed = top.get<std::uint64_t>("seed", c.seed);
  c.memory_cap = top.get<std::size_t>("memory_cap_bytes", c.memory_cap);
  top.finish();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
  return parse_config(text);
}

std::string to_json(const ExperimentConfig& c) {
  const ModelSpec& s = c.model;
  Json j;
  Json m;
  m["particles"] = s.particles;
  m["theta"] = s.theta;
  m["nu"] = optional_json(s.nu);
  m["regime"] = to_string(s.regime);
  m["interaction"] = {{"kind", to_string(s.w.kind)}, {"amplitude", s.w.amplitude}, {"support", s.w.support},
                      {"table_r", s.w.table_r},      {"table_w", s.w.table_w},     {"split", to_string(s.w.split)},
                      {"s", s.w.s}};
  m["potential"] = {{"enabled", s.V.enabled},
                    {"omega_free", s.V.omega_free},
                    {"omega_confined", s.V.omega_confined},
                    {"center", s.V.center},
                    {"modulation_amplitude", s.V.modulation_amplitude},
                    {"modulation_frequency", s.V.modulation_frequency}};
  m["free"] = {{"extent", s.free.extent}, {"points", s.free.points}};
  m["confined"] = {{"lo", s.confined.lo}, {"hi", s.confined.hi}, {"points", s.confined.points}, {"eps", s.confined.eps}};
  j["model"] = m;
  j["initial"] = {{"sigma", c.initial.sigma},
                  {"center", c.initial.center},
                  {"momentum", c.initial.momentum},
                  {"mode_index", c.initial.mode_index}};
  j["time"] = {{"T", c.T}, {"dt", c.dt}, {"stride", c.stride}};
  Json l;
  l["particles"] = c.ladder.particles;
  l["nu"] = optional_json(c.ladder.nu);
  l["eps"] = c.ladder.eps;
  l["functional"] = c.ladder.functional;
  l["residual_threshold"] = c.ladder.residual_threshold;
  j["ladder"] = l;
  if (c.rate) {
    Json r;
    r["regime"] = to_string(c.rate->regime);
    r["s"] = c.rate->s;
    r["s0"] = c.rate->s0;
    r["theta"] = c.rate->theta;
    r["nu"] = optional_json(c.rate->nu);
    r["delta"] = optional_json(c.rate->delta);
    r["vartheta"] = optional_json(c.rate->vartheta);
    j["rate"] = r;
  }
  j["output"] = {{"dir", c.out_dir.string()}};
  j["seed"] = c.seed;
  j["memory_cap_bytes"] = c.memory_cap;
  return write_json(j);
}

OneBodyState initial_state(const ExperimentConfig& c) {
  const auto df = static_cast<std::size_t>(c.model.free.dim());
  std::vector<double> center = c.initial.center, momentum = c.initial.momentum;
  center.resize(df, 0.0);
  momentum.resize(df, 0.0);
  const Grid free = free_grid(c.model.free);
  return make_onebody_state(gaussian_packet(free, c.initial.sigma, center, momentum),
                            chi_mode(c.model.confined, c.initial.mode_index));
}

SingleRun run_single(const ExperimentConfig& c, const RunOptions& opt) {
  c.validate();
  const ModelSpec& s = c.model;
  const Grid g = s.onebody_grid();
  check_memory(s.particles, g.size(), c.memory_cap);

  const OneBodyState phi0 = initial_state(c);
  const ManyBodyModel mm = make_manybody_model(s);
  const EffectiveModel em = make_effective_model(s, c.initial.mode_index);
  SingleRun run;
  run.phi = evolve_effective(phi0, em, c.T, c.dt, c.stride).states;
  run.convention = mm.convention;

  std::size_t next = 0;
  EvolveOptions eo;
  eo.stride = c.stride;
  eo.memory_cap = c.memory_cap;
  run.psi_final = evolve_manybody(
      product_state(phi0, s.particles), mm, c.T, c.dt,
      [&](const ManyBodyState& st) {
        if (next >= run.phi.size() || std::abs(run.phi[next].t - st.t) > 1e-9)
          throw InvariantError("run_single: many-body and effective report times disagree");
        run.series.push_back(counting_report(st, run.phi[next], mm, em));
        run.norms.push_back(sup_norms(run.phi[next]));
        if (opt.write_files && opt.snapshots)
          write_mfl1(c.out_dir / ("psi_t" + format_step(st.t) + ".mfl1"),
                     snapshot_of(g, s.particles, s.eps(), st.t, st.psi.data));
        ++next;
      },
      eo);
  if (next != run.phi.size()) throw InvariantError("run_single: missing report times");

  if (opt.write_files) {
    CsvTable csv(counting_csv_columns(s.particles));
    for (const auto& r : run.series) csv.add_row(counting_csv_row(r));
    write_atomic(c.out_dir / "counting.csv", csv.str());

    Json j;
    j["config"] = Json::parse(to_json(c));
    j["seed"] = c.seed;
    j["prefactor_convention"] = run.convention;
    j["one_body_points"] = g.size();
    j["reports"] = Json::array();
    for (const auto& r : run.series) j["reports"].push_back(Json::parse(to_json(r)));
    write_atomic(c.out_dir / "run.json", write_json(j));

    write_mfl1(c.out_dir / "psi_final.mfl1",
               snapshot_of(g, s.particles, s.eps(), run.psi_final.t, run.psi_final.psi.data));
    const GridFunction phi = run.phi.back().phi();
    write_mfl1(c.out_dir / "phi_final.mfl1", snapshot_of(g, 1, s.eps(), run.phi.back().t, nodal(phi)));
  }
  return run;
}

std::vector<OneBodyState> run_onebody(const ExperimentConfig& c, bool write_files) {
  c.validate();
  const EffectiveModel em = make_effective_model(c.model, c.initial.mode_index);
  auto states = evolve_effective(initial_state(c), em, c.T, c.dt, c.stride).states;
  if (write_files) {
    CsvTable csv({"t", "mass", "energy", "Phi_inf", "phi_inf", "phi_H2"});
    for (const auto& st : states) {
      const SupNorms n = sup_norms(st);
      const double mass = st.Phi.norm() * st.Phi.norm();
      csv.add_row({st.t, mass, effective_energy(st, em), n.Phi_inf, n.phi_inf, n.phi_H2});
    }
    write_atomic(c.out_dir / "onebody.csv", csv.str());
    const GridFunction phi = states.back().phi();
    write_mfl1(c.out_dir / "phi_final.mfl1", snapshot_of(phi.grid, 1, c.model.eps(), states.back().t, nodal(phi)));
  }
  return states;
}

std::string to_string(FitStatus s) {
  switch (s) {
    case FitStatus::ok: return "ok";
    case FitStatus::degenerate: return "degenerate";
    case FitStatus::incomplete: return "incomplete";
    case FitStatus::insufficient: return "insufficient";
    case FitStatus::withheld: return "withheld";
  }
  return "";
}

RateFit fit_rate(std::vector<LadderPoint> points, double residual_threshold) {
  RateFit fit;
  fit.points = std::move(points);
  fit.threshold = residual_threshold;
  if (std::any_of(fit.points.begin(), fit.points.end(), [](const LadderPoint& p) { return !p.ok; })) {
    fit.status = FitStatus::incomplete;
    return fit;
  }
  if (fit.points.size() < 3) {
    fit.status = FitStatus::insufficient;
    return fit;
  }
  // Terminal values at roundoff level (a non-interacting gas) carry no rate.
  constexpr double kTerminalFloor = 1e-12;
  if (std::any_of(fit.points.begin(), fit.points.end(),
                  [&](const LadderPoint& p) { return !(p.terminal > kTerminalFloor); })) {
    fit.status = FitStatus::degenerate;
    return fit;
  }
  const auto n = static_cast<double>(fit.points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : fit.points) {
    const double x = std::log(static_cast<double>(p.particles)), y = std::log(p.terminal);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) {
    fit.status = FitStatus::degenerate;
    return fit;
  }
  fit.raw_slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.raw_slope * sx) / n;
  double ss = 0.0;
  for (const auto& p : fit.points) {
    const double r = std::log(p.terminal) - (fit.intercept + fit.raw_slope * std::log(static_cast<double>(p.particles)));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  if (fit.residual > residual_threshold) {
    fit.status = FitStatus::withheld;
    return fit;
  }
  fit.status = FitStatus::ok;
  fit.slope = fit.raw_slope;
  return fit;
}

std::string RateFit::to_json() const {
  Json j;
  j["status"] = cmf::to_string(status);
  j["slope"] = optional_json(slope);
  j["intercept"] = status == FitStatus::ok ? Json(intercept) : Json();
  j["residual"] = status == FitStatus::ok || status == FitStatus::withheld ? Json(residual) : Json();
  j["residual_threshold"] = threshold;
  j["points"] = Json::array();
  for (const auto& p : points)
    j["points"].push_back({{"N", p.particles},
                           {"eps", p.eps},
                           {"terminal", p.ok ? Json(p.terminal) : Json()},
                           {"terminal_alpha", p.ok ? Json(p.terminal_alpha) : Json()},
                           {"terminal_beta", p.ok ? Json(p.terminal_beta) : Json()},
                           {"ok", p.ok},
                           {"error", p.error}});
  return write_json(j);
}

namespace {

// Admits tasks while the summed memory estimates stay within the cap.
class MemoryBudget {
 public:
  explicit MemoryBudget(std::size_t cap) : cap_(cap) {}

  void acquire(std::size_t bytes) {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return used_ + bytes <= cap_; });
    used_ += bytes;
  }

  void release(std::size_t bytes) {
    {
      std::lock_guard lock(m_);
      used_ -= bytes;
    }
    cv_.notify_all();
  }

 private:
  std::size_t cap_;
  std::size_t used_ = 0;
  std::mutex m_;
  std::condition_variable cv_;
};

const char* kPlotScript = R"(# Generated by cmflab ladder. Reads ladder.csv and ladder_fit.json next to this file.
import csv, json, math, pathlib
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).parent
rows = [r for r in csv.DictReader(open(here / "ladder.csv")) if r["ok"] == "1"]
fit = json.load(open(here / "ladder_fit.json"))
N = [float(r["N"]) for r in rows]
y = [float(r["terminal"]) for r in rows]
plt.loglog(N, y, "o", label="terminal value")
if fit["slope"] is not None:
    plt.loglog(N, [math.exp(fit["intercept"]) * n ** fit["slope"] for n in N], "-",
               label="slope %.3f" % fit["slope"])
plt.xlabel("N")
plt.legend()
plt.savefig(here / "ladder.png", dpi=150)
)";

}  // namespace

RateFit run_ladder(const ExperimentConfig& c, int workers, bool write_files) {
  c.validate();
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  const std::size_t count = c.ladder.particles.size();
  std::vector<LadderPoint> points(count);
  const Index dim = c.model.onebody_grid().size();
  MemoryBudget budget(c.memory_cap);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      LadderPoint& p = points[i];
      p.particles = c.ladder.particles[i];
      p.eps = c.ladder.eps_for(i);
      const std::size_t need = manybody_memory_estimate(p.particles, dim);
      if (need > c.memory_cap) {
        p.error = "memory estimate " + std::to_string(need) + " bytes exceeds the cap; lower N or the grid";
        continue;
      }
      budget.acquire(need);
      try {
        ExperimentConfig pc = c;
        pc.model.particles = p.particles;
        pc.model.confined.eps = p.eps;
        pc.out_dir = c.out_dir / ("N" + std::to_string(p.particles));
        RunOptions ro;
        ro.write_files = write_files;
        const SingleRun run = run_single(pc, ro);
        p.terminal_alpha = run.series.back().alpha;
        p.terminal_beta = run.series.back().beta;
        p.terminal = c.ladder.functional == "alpha" ? p.terminal_alpha : p.terminal_beta;
        p.ok = true;
      } catch (const std::exception& e) {
        p.error = e.what();
      }
      budget.release(need);
    }
  };
  const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  RateFit fit = fit_rate(points, c.ladder.residual_threshold);
  if (write_files) {
    CsvTable csv({"N", "eps", "terminal", "terminal_alpha", "terminal_beta", "ok"});
    for (const auto& p : fit.points)
      csv.add_row({double(p.particles), p.eps, p.terminal, p.terminal_alpha, p.terminal_beta, p.ok ? 1.0 : 0.0});
    write_atomic(c.out_dir / "ladder.csv", csv.str());
    write_atomic(c.out_dir / "ladder_fit.json", fit.to_json());
    write_atomic(c.out_dir / "plot_ladder.py", kPlotScript);
  }
  return fit;
}

namespace {

WeightFunction random_weight(std::mt19937_64& rng, int N) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(N + 1);
  for (auto& x : v) x = u(rng);
  return weight_custom(v);
}

Eigen::VectorXcd random_unit(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (Index i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  return v / v.norm();
}

// Orthonormal vectors orthogonal to phi.
std::vector<Eigen::VectorXcd> complement(const Eigen::VectorXcd& phi, std::mt19937_64& rng, int count) {
  std::vector<Eigen::VectorXcd> out;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXcd v = random_unit(rng, phi.size());
    v -= phi * phi.dot(v) / phi.squaredNorm();
    for (const auto& u : out) v -= u * u.dot(v);
    out.push_back(v / v.norm());
  }
  return out;
}

struct Row {
  std::string name;
  double tolerance;
  double worst = 0.0;
  void see(double v) { worst = std::max(worst, std::isfinite(v) ? v : std::numeric_limits<double>::infinity()); }
};

// Small grid condensate and pair kernel for the operator-norm row.
std::pair<PairKernel, Condensate> young_setup(double phi_scale) {
  ModelSpec s;
  s.particles = 2;
  s.free = FreeDomain{{6.0}, {8}};
  s.confined = ConfinedDomain{{-0.5}, {0.5}, {4}, 0.5};
  s.w.kind = ProfileKind::compact_bump;
  s.w.amplitude = 2.0;
  s.w.support = 1.5;
  const ManyBodyModel mm = make_manybody_model(s);
  const Grid free = free_grid(s.free);
  std::vector<double> center{0.2}, momentum{0.7};
  const OneBodyState st = make_onebody_state(gaussian_packet(free, 0.9, center, momentum), chi_mode(s.confined, 0));
  return {mm.kernel, Condensate{phi_scale * nodal(st.phi())}};
}

}  // namespace

std::vector<LemmaResult> verify_lemmas(const LemmaOptions& opt) {
  if (opt.states < 1 || opt.dim < 2) throw ConfigError("verify_lemmas: need dim >= 2 and at least one state");
  std::vector<LemmaResult> out;
  const PairProjector all[] = {PairProjector::pp, PairProjector::pq, PairProjector::qp, PairProjector::qq};
  for (int N : opt.particles) {
    if (N < 2) throw ConfigError("verify_lemmas: particle numbers must be >= 2");
    std::seed_seq seq{opt.seed, static_cast<std::uint64_t>(N)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Condensate c{opt.phi_scale * random_unit(rng, opt.dim)};

    Row norm{"normalization", 1e-10}, comp{"completeness", 1e-9}, number{"number_identity", 1e-9},
        prod{"hat_product", 1e-9}, comm{"hat_commutes_with_p", 1e-9}, shift{"shift_identity", 1e-9},
        sandwich{"trace_sandwich", 1e-9}, exact{"counting_exactness", 1e-10}, wdiff{"weight_difference", 1e-10};
    norm.see(std::abs(c.phi.norm() - 1.0));

    for (int trial = 0; trial < opt.states; ++trial) {
      const Tensor psi = random_symmetric_state(N, opt.dim, rng);
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
        number.see((qsum - double(k) * Pk.data).norm());
      }
      comp.see((sum - psi.data).norm());

      const auto f = random_weight(rng, N), h = random_weight(rng, N);
      prod.see((hat_apply(f, hat_apply(h, psi, c), c).data - hat_apply(product(f, h), psi, c).data).norm());
      const Tensor fpsi = hat_apply(f, psi, c);
      for (int j = 0; j < N; ++j) {
        Tensor a = fpsi;
        apply_p(a, c, j);
        Tensor b = psi;
        apply_p(b, c, j);
        comm.see((a.data - hat_apply(f, b, c).data).norm());
      }
      Eigen::MatrixXcd T(opt.dim, opt.dim);
      std::normal_distribution<double> g;
      for (Index a = 0; a < opt.dim; ++a)
        for (Index b = 0; b < opt.dim; ++b) T(a, b) = cplx(g(rng), g(rng));
      for (auto l : all)
        for (auto r : all) shift.see(shift_identity_residual(f, l, T, r, psi, c));

      // The random state itself, and a nearby product state where the upper bound is tight.
      const Tensor pert = perturbed_product_state(c, N, std::pow(10.0, -3.0 + 3.5 * unit(rng)), rng);
      for (const Tensor* s : {&psi, &pert}) {
        const double a = alpha(*s, c);
        const double tr = trace_distance(density_matrix(*s), c);
        sandwich.see(std::max(a - tr, tr - std::sqrt(8.0 * a)));
      }

      if (trial < opt.weight_states) {
        for (const auto& m : {weight_fraction(N), weight_sqrt_fraction(N)})
          for (int l : {1, 2}) {
            const auto d = weight_difference_bound(m, l, psi, c);
            wdiff.see(d.lhs - d.rhs);
          }
      }
    }

    const auto same = complement(c.phi, rng, 1), distinct = complement(c.phi, rng, 3);
    for (int k = 0; k <= N; ++k)
      for (const auto* ex : {&same, &distinct}) {
        std::vector<Eigen::VectorXcd> factors(N - k, c.phi / c.phi.norm());
        for (int i = 0; i < k; ++i) factors.push_back((*ex)[i % ex->size()]);
        const Tensor psi = symmetrize(tensor_product(factors));
        exact.see(std::abs(alpha(psi, c) - double(k) / N));
        exact.see(std::abs(beta(psi, c) - std::sqrt(double(k) / N)));
      }

    for (const Row* r : {&norm, &comp, &number, &prod, &comm, &shift, &sandwich, &exact, &wdiff})
      out.push_back({r->name, N, r->worst, r->tolerance, r->worst <= r->tolerance});
  }

  const auto [kernel, cy] = young_setup(opt.phi_scale);
  const YoungCheck y = young_check(kernel, cy, 200, opt.seed);
  const double yr = std::max(y.pair_times_p - y.pair_times_p_bound, y.sandwich - y.sandwich_bound);
  out.push_back({"young_operator_norms", 2, yr, 1e-6, yr <= 1e-6});
  return out;
}

std::string lemma_table_json(const std::vector<LemmaResult>& rows) {
  Json j = Json::array();
  for (const auto& r : rows)
    j.push_back({{"invariant", r.name},
                 {"N", r.particles},
                 {"residual", r.residual},
                 {"tolerance", r.tolerance},
                 {"pass", r.pass}});
  return write_json(j);
}

bool all_pass(const std::vector<LemmaResult>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const LemmaResult& r) { return r.pass; });
}

BoundReport bounds_report(const ExperimentConfig& c, const SingleRun& run) {
  const ModelSpec& s = c.model;
  const bool explicit_ok = s.regime == Regime::hartree && s.w.kind != ProfileKind::coulomb;
  RateSpec spec;
  if (c.rate) {
    spec = *c.rate;
  } else {
    spec.regime = explicit_ok ? RateRegime::thm1 : s.regime == Regime::hartree ? RateRegime::thm2 : RateRegime::thm3;
    spec.theta = s.theta;
    spec.nu = s.nu;
  }
  if (spec.regime == RateRegime::thm1) {
    if (!explicit_ok) throw ConfigError("the explicit envelope needs theta = 0 and a non-coulomb interaction");
    return thm1_bound_report(run.series, run.norms, interaction_norms(s), s.particles);
  }

  const double eta = rate_exponent(spec).eta;
  double delta = std::abs(run.series.front().E_psi - run.series.front().E_phi) + std::pow(s.particles, -eta);
  std::vector<double> integrand, times, measured;
  const Grid g = s.onebody_grid();
  for (std::size_t i = 0; i < run.series.size(); ++i) {
    times.push_back(run.series[i].t);
    measured.push_back(run.series[i].beta_tilde);
    if (spec.regime == RateRegime::thm3) {
      const double t = run.series[i].t;
      const double V = s.V.enabled ? max_abs(sample_potential(s.V, g, s.free.dim(), s.eps(), t, false)) : 0.0;
      const double Vt = s.V.enabled ? max_abs(sample_potential_rate(s.V, g, s.free.dim(), s.eps(), t, false)) : 0.0;
      integrand.push_back(
          thm3_integrand(run.norms[i], density_laplacian_l2(run.phi[i]), run.phi[i].mode.sup_norm(), Vt, V));
    } else {
      integrand.push_back(thm2_integrand(run.norms[i]));
    }
  }
  if (spec.regime != RateRegime::thm3 && explicit_ok) delta += interaction_norms(s).f_eps;
  return fitted_bound_report(spec, times, measured, integrand, delta);
}

}  // namespace cmf
