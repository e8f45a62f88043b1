#pragma once

// Declarative experiment runs: configuration parsing, the five experiment
// kinds, the parallel replicate pool and artifact emission.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbi2/estimate.hpp"
#include "cbi2/simulate.hpp"
#include "cbi2/stats.hpp"

namespace cbi2 {

enum class ExperimentKind { simulate, estimate, mc_consistency, mc_clt, laplace_check };

const char* to_string(ExperimentKind kind) noexcept;
/// Accepts both "mc_clt" and "mc-clt" spellings.
ExperimentKind parse_experiment_kind(const std::string& text);

/// Flat `key = value` settings; later assignments win.
using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment. Throws ConfigParse with
/// the line number on malformed input.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::simulate;
  SimConfig sim;
  Sampler sampler = Sampler::euler;
  std::string weight = "constant";
  RhoNormalization rho_norm = RhoNormalization::divide;
  std::size_t replicates = 100;
  std::vector<std::size_t> n_grid{1000, 4000, 16000};
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> estimate_input;
  /// Sandwich covariance per estimate; defaults to on except for mc_consistency.
  std::optional<bool> covariance;
  std::vector<Vec2> laplace_lambdas{{0.5, 0.0}, {0.0, 0.5}, {0.3, 0.7}};
  std::vector<double> laplace_scales{0.5, 1.0, 2.0};
  double laplace_t = 1.0;
  std::size_t laplace_n_paths = 100000;

  std::uint64_t seed() const noexcept { return sim.seed; }
  bool covariance_enabled() const noexcept;
  /// Throws Config on kind-specific violations.
  void validate() const;
};

/// Builds a config from settings; unknown keys are a ConfigParse error.
/// Recognized keys: kind, seed, output_dir, weight, rho_normalization,
/// replicates, n_grid, model.{a1,a2,b11,b12,b21,b22,sigma1,sigma2},
/// sim.{euler_dt,delta,n_obs,burn_in,x0,sampler}, estimate.{input,covariance},
/// laplace.{lambda,scales,t,n_paths}.
ExperimentConfig config_from_map(const ConfigMap& settings);

/// Every key with its resolved value (defaults filled in), one per line.
std::string resolved_config_text(const ExperimentConfig& cfg);

/// One Monte Carlo replicate estimate at one sample size.
struct McRow {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  /// "ok", or the error kind that stopped this replicate.
  std::string status = "ok";
  std::vector<std::pair<std::string, double>> fields;
};

struct ConsistencyRow {
  std::size_t n = 0;
  std::size_t used = 0;
  double median_drift_error = 0.0;
  double rmse_drift_error = 0.0;
  double median_abs_error_sigma1_sq = 0.0;
  double median_abs_error_sigma2_sq = 0.0;
};

struct ConsistencySummary {
  std::vector<ConsistencyRow> rows;
  /// median drift error at the first grid point over the last.
  double ratio = 0.0;
  bool monotone = false;
};

/// Replicate distribution of one scalar estimator.
struct MarginalSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  /// Standard deviation of the estimates over replicates, divided by sqrt(M).
  double std_error = 0.0;
  /// Sample variance of sqrt(n)(estimate - truth).
  double empirical_var = 0.0;
  /// Mean over replicates of n times the reported variance; NaN if absent.
  double sandwich_var = 0.0;
  double var_ratio = 0.0;
  KsResult ks;
};

struct CltSummary {
  std::size_t n = 0;
  std::size_t used = 0;
  /// theta marginals (a1, ..., sigma2), then rho1, rho2, gamma11..gamma22.
  std::vector<MarginalSummary> marginals;
  const MarginalSummary& at(const std::string& name) const;
};

struct LaplaceRow {
  Vec2 lambda;
  double scale = 1.0;
  LaplaceCheckReport report;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::simulate;
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> files;
  std::optional<ObservationSeries> series;
  std::optional<EstimateReport> estimate;
  std::vector<McRow> rows;
  std::optional<ConsistencySummary> consistency;
  std::optional<CltSummary> clt;
  std::vector<LaplaceRow> laplace;
};

/// Worker count used when `jobs` is 0.
unsigned default_jobs() noexcept;

/// Calls task(i) for i in [0, count) on up to `jobs` threads. Exceptions are
/// rethrown on the caller (lowest index first).
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task);

/// Runs the experiment and writes its artifacts into cfg.output_dir. Output
/// bytes depend only on the config, never on `jobs`. Estimator failures in
/// the single-estimate kind propagate as Error after artifacts are written.
ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned jobs = 0);

/// Header and rows of estimates.csv for Monte Carlo kinds.
std::vector<std::string> mc_column_names();
std::string mc_csv(const std::vector<McRow>& rows);

/// Summary statistics recomputed from parsed estimates.csv columns.
ConsistencySummary summarize_consistency(const std::vector<McRow>& rows, const ModelParams& truth,
                                         const std::vector<std::size_t>& n_grid, double delta);
CltSummary summarize_clt(const std::vector<McRow>& rows, const ModelParams& truth, double delta);

std::string consistency_summary_text(const ConsistencySummary& s);
std::string clt_summary_text(const CltSummary& s);

/// Parses an estimates.csv produced by mc_csv back into rows.
std::vector<McRow> parse_mc_csv(const std::string& text);

}  // namespace cbi2
