#pragma once

#include "cmf/bounds.hpp"
#include "cmf/counting.hpp"
#include "cmf/manybody.hpp"
#include "cmf/model.hpp"
#include "cmf/onebody.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cmf {

// Gaussian packet in the free directions times the confined mode `mode_index`.
struct InitialData {
  double sigma = 1.0;
  std::vector<double> center;
  std::vector<double> momentum;
  int mode_index = 0;
};

// Either eps(N) = N^-nu, or an explicit list (one value for all N, or one per N).
struct LadderSpec {
  std::vector<int> particles;
  std::optional<double> nu;
  std::vector<double> eps;
  std::string functional = "beta";  // "beta" or "alpha"
  double residual_threshold = 0.25;

  double eps_for(std::size_t i) const;
};

struct ExperimentConfig {
  ModelSpec model;
  InitialData initial;
  double T = 1.0;
  double dt = 0.01;
  int stride = 10;
  LadderSpec ladder;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  std::size_t memory_cap = kDefaultMemoryCap;
  std::optional<RateSpec> rate;

  // Throws ConfigError.
  void validate() const;
};

// Unknown keys and wrong types are ConfigErrors. Missing keys take the defaults above.
ExperimentConfig parse_config(std::string_view json);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& c);

OneBodyState initial_state(const ExperimentConfig& c);

struct SingleRun {
  std::vector<CountingReport> series;
  std::vector<SupNorms> norms;
  std::vector<OneBodyState> phi;  // effective states at the report times
  ManyBodyState psi_final;
  std::string convention;
};

struct RunOptions {
  bool write_files = true;
  bool snapshots = false;  // MFL1 file of psi at every report time
};

// Evolves psi and phi in lockstep and reports at every stride-th step. Writes
// counting.csv, run.json, psi_final.mfl1 and phi_final.mfl1 into out_dir.
SingleRun run_single(const ExperimentConfig& c, const RunOptions& opt = {});

// Effective dynamics only; writes onebody.csv (t, mass, energy, sup norms) and phi_final.mfl1.
std::vector<OneBodyState> run_onebody(const ExperimentConfig& c, bool write_files = true);

struct LadderPoint {
  int particles = 0;
  double eps = 0.0;
  double terminal = 0.0;
  double terminal_alpha = 0.0;
  double terminal_beta = 0.0;
  bool ok = false;
  std::string error;
};

enum class FitStatus { ok, degenerate, incomplete, insufficient, withheld };
std::string to_string(FitStatus s);

// Least-squares line through (log N, log terminal).
struct RateFit {
  std::vector<LadderPoint> points;
  FitStatus status = FitStatus::insufficient;
  std::optional<double> slope;  // absent unless status == ok
  double raw_slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of log residuals
  double threshold = 0.0;

  std::string to_json() const;
};

RateFit fit_rate(std::vector<LadderPoint> points, double residual_threshold);

// Runs each ladder point as a task on at most `workers` threads while the sum
// of memory estimates of the running tasks stays within the memory cap. Writes
// ladder.csv, ladder_fit.json and plot_ladder.py into out_dir.
RateFit run_ladder(const ExperimentConfig& c, int workers = 1, bool write_files = true);

struct LemmaOptions {
  std::uint64_t seed = 1;
  Index dim = 4;
  std::vector<int> particles{2, 3, 4, 5};
  int states = 100;
  // Leading states that also run the weight-difference bound.
  int weight_states = 50;
  // Scales the reference vector; anything but 1 must fail the normalization row.
  double phi_scale = 1.0;
};

struct LemmaResult {
  std::string name;
  int particles = 0;
  double residual = 0.0;  // worst value of (lhs - rhs) or of the identity residual
  double tolerance = 0.0;
  bool pass = false;
};

std::vector<LemmaResult> verify_lemmas(const LemmaOptions& opt);
std::string lemma_table_json(const std::vector<LemmaResult>& rows);
bool all_pass(const std::vector<LemmaResult>& rows);

// Explicit envelope for theta = 0 with a non-coulomb profile, otherwise the
// fitted diagnostic for the configured (or regime default) rate.
BoundReport bounds_report(const ExperimentConfig& c, const SingleRun& run);

}  // namespace cmf
