#include "cmf/bounds.hpp"
#include "cmf/errors.hpp"
#include "cmf/harness.hpp"
#include "cmf/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

using namespace cmf;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

ExperimentConfig resolve(const Common& o) {
  if (o.config.empty()) throw ConfigError("--config is required for this subcommand");
  ExperimentConfig c = load_config(o.config);
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.seed) c.seed = *o.seed;
  return c;
}

void add_common(CLI::App* sub, Common& o, bool needs_config) {
  auto* opt = sub->add_option("--config", o.config, "experiment config (JSON)");
  if (needs_config) opt->required();
  sub->add_option("--out", o.out, "output directory (overrides the config)");
  sub->add_option("--seed", o.seed, "RNG seed (overrides the config)");
  sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
}

void print_report(const CountingReport& r) {
  std::printf("t=%.4f alpha=%.6e beta=%.6e beta_tilde=%.6e trace=%.6e\n", r.t, r.alpha, r.beta, r.beta_tilde,
              r.trace_distance);
}

int simulate_onebody(const Common& o) {
  const auto c = resolve(o);
  const auto states = run_onebody(c);
  std::printf("wrote %zu states to %s\n", states.size(), (c.out_dir / "onebody.csv").string().c_str());
  return 0;
}

int simulate_manybody(const Common& o, bool snapshots) {
  const auto c = resolve(o);
  RunOptions ro;
  ro.snapshots = snapshots;
  const auto run = run_single(c, ro);
  print_report(run.series.back());
  std::printf("wrote %s\n", (c.out_dir / "counting.csv").string().c_str());
  return 0;
}

int ladder(const Common& o) {
  const auto c = resolve(o);
  const auto fit = run_ladder(c, o.workers);
  for (const auto& p : fit.points) {
    if (p.ok)
      std::printf("N=%d eps=%.4g terminal=%.6e\n", p.particles, p.eps, p.terminal);
    else
      std::printf("N=%d eps=%.4g failed: %s\n", p.particles, p.eps, p.error.c_str());
  }
  if (fit.slope)
    std::printf("slope=%.4f residual=%.3e\n", *fit.slope, fit.residual);
  else
    std::printf("fit %s, no slope reported\n", to_string(fit.status).c_str());
  return fit.status == FitStatus::incomplete ? 3 : 0;
}

int verify(const Common& o, double phi_scale, int states) {
  LemmaOptions lo;
  if (!o.config.empty()) lo.seed = resolve(o).seed;
  if (o.seed) lo.seed = *o.seed;
  lo.phi_scale = phi_scale;
  lo.states = states;
  const auto rows = verify_lemmas(lo);
  for (const auto& r : rows)
    std::printf("%-4s %-22s N=%d residual=%.3e tol=%.0e\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.particles,
                r.residual, r.tolerance);
  const std::filesystem::path out = o.out.empty() ? std::filesystem::path("out") : std::filesystem::path(o.out);
  write_atomic(out / "lemmas.json", lemma_table_json(rows));
  if (!all_pass(rows)) {
    for (const auto& r : rows)
      if (!r.pass) std::fprintf(stderr, "invariant failed: %s (N=%d)\n", r.name.c_str(), r.particles);
    return 2;
  }
  return 0;
}

int bounds(const Common& o) {
  const auto c = resolve(o);
  const auto run = run_single(c);
  const auto report = bounds_report(c, run);
  write_atomic(c.out_dir / "bounds.json", report.to_json());
  std::printf("%s eta=%.4f below_envelope=%s\n", report.regime.c_str(), report.eta,
              report.below_envelope ? "yes" : "no");
  return 0;
}

int coulomb(const Common& o, const std::vector<double>& eps) {
  CsvTable csv({"eps", "l1_defect", "l1_closed_form", "linf_defect", "log_value"});
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (double e : eps) {
    const auto n = coulomb_confined_norms(e);
    csv.add_row({n.eps, n.l1_defect, n.l1_closed_form, n.linf_defect, n.log_value});
    j.push_back({{"eps", n.eps},
                 {"l1_defect", n.l1_defect},
                 {"l1_closed_form", n.l1_closed_form},
                 {"linf_defect", n.linf_defect},
                 {"log_value", n.log_value}});
    std::printf("eps=%.5g L1=%.6e Linf=%.6e log=%.6f\n", n.eps, n.l1_defect, n.linf_defect, n.log_value);
  }
  const std::filesystem::path out = o.out.empty() ? std::filesystem::path("out") : std::filesystem::path(o.out);
  write_atomic(out / "coulomb_norms.csv", csv.str());
  write_atomic(out / "coulomb_norms.json", j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confined mean-field laboratory"};
  app.require_subcommand(1);
  Common o;

  auto* s1 = app.add_subcommand("simulate-onebody", "effective one-body dynamics");
  add_common(s1, o, true);
  auto* s2 = app.add_subcommand("simulate-manybody", "many-body dynamics with snapshots");
  add_common(s2, o, true);
  auto* s3 = app.add_subcommand("counting", "counting functionals along a many-body run");
  add_common(s3, o, true);
  auto* s4 = app.add_subcommand("ladder", "N ladder and log-log rate fit");
  add_common(s4, o, true);
  auto* s5 = app.add_subcommand("verify-lemmas", "projector and counting invariant table");
  add_common(s5, o, false);
  double phi_scale = 1.0;
  int states = 100;
  s5->add_option("--phi-scale", phi_scale, "scale applied to the reference vector (negative control)");
  s5->add_option("--states", states, "random states per particle number")->check(CLI::PositiveNumber);
  auto* s6 = app.add_subcommand("bounds", "envelope or fitted bound report for a run");
  add_common(s6, o, true);
  auto* s7 = app.add_subcommand("coulomb-norms", "confined coulomb quadratures");
  add_common(s7, o, false);
  std::vector<double> eps{0.1, 0.05, 0.025, 0.0125};
  s7->add_option("--eps", eps, "eps values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 4;
  }

  try {
    if (*s1) return simulate_onebody(o);
    if (*s2) return simulate_manybody(o, true);
    if (*s3) return simulate_manybody(o, false);
    if (*s4) return ladder(o);
    if (*s5) return verify(o, phi_scale, states);
    if (*s6) return bounds(o);
    if (*s7) return coulomb(o, eps);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 4;
  } catch (const GuardError& e) {
    std::cerr << "guard violation: " << e.what() << "\n";
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
