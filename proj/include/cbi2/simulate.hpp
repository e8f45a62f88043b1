#pragma once

// Path simulation of the two-type CBI diffusion and equally spaced
// observation series.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbi2/mat2.hpp"
#include "cbi2/model.hpp"
#include "cbi2/rng.hpp"

namespace cbi2 {

enum class Sampler {
  euler,  // full-truncation Euler, any admissible model
  exact,  // exact noncentral chi-square transitions, decoupled model only
};

const char* to_string(Sampler s) noexcept;
Sampler parse_sampler(const std::string& text);

struct SimConfig {
  ModelParams params;
  double euler_dt = 1e-3;
  double delta = 1.0;
  std::size_t n_obs = 1000;
  /// Unset means 50 / xi_min.
  std::optional<double> burn_in;
  Vec2 x0{1.0, 1.0};
  std::uint64_t seed = 1;
  Validation validation = Validation::strict;

  double resolved_burn_in() const;
  /// Euler steps per observation interval.
  std::size_t steps_per_obs() const;
  void validate() const;
};

struct ObservationSeries {
  double delta = 1.0;
  std::vector<Vec2> obs;
  /// Empty for series read from external data.
  std::optional<SimConfig> meta;

  /// Number of transitions (observations minus one).
  std::size_t n() const noexcept { return obs.empty() ? 0 : obs.size() - 1; }
};

/// Full-truncation Euler:
///   X <- X + (A - B X+) h + Sigma sqrt(X+) sqrt(h) xi,  X+ = max(X, 0),
/// observations are the post-burn-in states at multiples of delta, floored
/// at zero. Deterministic in cfg.seed.
ObservationSeries simulate_path(const SimConfig& cfg);

/// Exact transitions for b12 = b21 = 0: each coordinate is an independent
/// scalar CIR process. Throws NotDiagonal otherwise. The burn-in is a single
/// exact transition of length burn_in.
ObservationSeries simulate_exact_diagonal(const SimConfig& cfg);

ObservationSeries simulate(const SimConfig& cfg, Sampler sampler);

/// One exact scalar CIR transition over `dt` from `x`.
double cir_exact_step(double x, double a, double b, double sigma, double dt, Engine& engine);

/// States at time t of n_paths independent paths started at cfg.x0; path i
/// draws from stream_seed(cfg.seed, first_path + i), so any split of the
/// index range reproduces the same states.
std::vector<Vec2> terminal_states(const SimConfig& cfg, double t, std::size_t n_paths, Sampler sampler,
                                  std::size_t first_path = 0);

struct LaplaceCheckReport {
  Vec2 lambda;
  double t = 0.0;
  double formula = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  std::size_t n_paths = 0;
};

/// Empirical mean of exp(-<lambda, X_t>) over `terminal` against
/// transition_laplace from `x0`.
LaplaceCheckReport laplace_compare(const ModelParams& params, const Vec2& x0, const std::vector<Vec2>& terminal,
                                   const Vec2& lambda, double t);

LaplaceCheckReport laplace_check(const SimConfig& cfg, const Vec2& lambda, double t, std::size_t n_paths,
                                 Sampler sampler = Sampler::euler);

/// CSV with header "t,x1,x2"; 17 significant digits so values round-trip.
std::string series_to_csv(const ObservationSeries& series);
ObservationSeries series_from_csv(const std::string& text);
void write_series_csv(const std::filesystem::path& path, const ObservationSeries& series);
ObservationSeries read_series_csv(const std::filesystem::path& path);

}  // namespace cbi2
