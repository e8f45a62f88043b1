#include "cbi2/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cbi2/error.hpp"
#include "cbi2/text.hpp"

namespace cbi2 {

const char* to_string(Sampler s) noexcept {
  switch (s) {
    case Sampler::euler: return "euler";
    case Sampler::exact: return "exact";
  }
  return "euler";
}

Sampler parse_sampler(const std::string& text) {
  if (text == "euler") return Sampler::euler;
  if (text == "exact") return Sampler::exact;
  throw Error(ErrorKind::ConfigParse, "unknown sampler '" + text + "' (expected euler or exact)");
}

double SimConfig::resolved_burn_in() const { return burn_in ? *burn_in : 50.0 / params.xi_min(); }

std::size_t SimConfig::steps_per_obs() const {
  const double ratio = delta / euler_dt;
  const double k = std::round(ratio);
  if (!(k >= 1.0) || std::abs(ratio - k) > 1e-9 * ratio) {
    throw Error(ErrorKind::Config, "delta must be a positive integer multiple of euler_dt", ratio);
  }
  return static_cast<std::size_t>(k);
}

void SimConfig::validate() const {
  params.validate(validation);
  if (!(euler_dt > 0.0)) throw Error(ErrorKind::Config, "euler_dt must be > 0", euler_dt);
  if (!(delta > 0.0)) throw Error(ErrorKind::Config, "delta must be > 0", delta);
  if (n_obs < 1) throw Error(ErrorKind::Config, "n_obs must be >= 1");
  if (burn_in && !(*burn_in >= 0.0)) throw Error(ErrorKind::Config, "burn_in must be >= 0", *burn_in);
  if (!burn_in && !(params.xi_min() > 0.0)) {
    throw Error(ErrorKind::Config, "default burn-in needs a drift matrix with positive eigenvalues", params.xi_min());
  }
  if (x0.v1() < 0.0 || x0.v2() < 0.0) throw Error(ErrorKind::Config, "x0 must be componentwise >= 0");
  steps_per_obs();
}

namespace {

class EulerStepper {
 public:
  EulerStepper(const ModelParams& p, double h) : p_(p), h_(h), sqrt_h_(std::sqrt(h)) {}

  void advance(double& x1, double& x2, std::size_t steps, Engine& engine) {
    for (std::size_t i = 0; i < steps; ++i) {
      const double y1 = std::max(x1, 0.0);
      const double y2 = std::max(x2, 0.0);
      const double drift1 = p_.a1 - p_.b11 * y1 + p_.b12 * y2;
      const double drift2 = p_.a2 + p_.b21 * y1 - p_.b22 * y2;
      const double z1 = normal_(engine);
      const double z2 = normal_(engine);
      x1 += drift1 * h_ + p_.sigma1 * std::sqrt(y1) * sqrt_h_ * z1;
      x2 += drift2 * h_ + p_.sigma2 * std::sqrt(y2) * sqrt_h_ * z2;
    }
  }

 private:
  ModelParams p_;
  double h_;
  double sqrt_h_;
  std::normal_distribution<double> normal_;
};

Vec2 floored(double x1, double x2) { return {std::max(x1, 0.0), std::max(x2, 0.0)}; }

void require_diagonal(const ModelParams& p) {
  if (!p.is_diagonal()) throw Error(ErrorKind::NotDiagonal, "exact sampler requires b12 = b21 = 0");
}

}  // namespace

ObservationSeries simulate_path(const SimConfig& cfg) {
  cfg.validate();
  Engine engine = make_engine(cfg.seed);
  EulerStepper stepper(cfg.params, cfg.euler_dt);
  const auto burn_steps = static_cast<std::size_t>(std::llround(cfg.resolved_burn_in() / cfg.euler_dt));
  const std::size_t per_obs = cfg.steps_per_obs();

  double x1 = cfg.x0.v1();
  double x2 = cfg.x0.v2();
  stepper.advance(x1, x2, burn_steps, engine);

  ObservationSeries series{cfg.delta, {}, cfg};
  series.obs.reserve(cfg.n_obs + 1);
  series.obs.push_back(floored(x1, x2));
  for (std::size_t k = 1; k <= cfg.n_obs; ++k) {
    stepper.advance(x1, x2, per_obs, engine);
    series.obs.push_back(floored(x1, x2));
  }
  return series;
}

double cir_exact_step(double x, double a, double b, double sigma, double dt, Engine& engine) {
  // X_dt = chi'^2(df, nc) / (2c): c = 2b / (sigma^2 (1 - e^{-b dt})),
  // df = 4a / sigma^2, nc = 2 c x e^{-b dt}. The noncentral chi-square is a
  // Poisson(nc/2) mixture of central chi-squares with df + 2N degrees.
  const double sigma_sq = sigma * sigma;
  const double decay = std::exp(-b * dt);
  const double c = 2.0 * b / (sigma_sq * -std::expm1(-b * dt));
  const double df = 4.0 * a / sigma_sq;
  const double nc = 2.0 * c * x * decay;
  long long mix = 0;
  if (nc > 0.0) mix = std::poisson_distribution<long long>(0.5 * nc)(engine);
  const double shape = 0.5 * df + static_cast<double>(mix);
  const double chi = std::gamma_distribution<double>(shape, 2.0)(engine);
  return chi / (2.0 * c);
}

ObservationSeries simulate_exact_diagonal(const SimConfig& cfg) {
  require_diagonal(cfg.params);
  cfg.validate();
  const ModelParams& p = cfg.params;
  Engine engine = make_engine(cfg.seed);
  double x1 = cfg.x0.v1();
  double x2 = cfg.x0.v2();
  const double burn = cfg.resolved_burn_in();
  if (burn > 0.0) {
    x1 = cir_exact_step(x1, p.a1, p.b11, p.sigma1, burn, engine);
    x2 = cir_exact_step(x2, p.a2, p.b22, p.sigma2, burn, engine);
  }
  ObservationSeries series{cfg.delta, {}, cfg};
  series.obs.reserve(cfg.n_obs + 1);
  series.obs.push_back(floored(x1, x2));
  for (std::size_t k = 1; k <= cfg.n_obs; ++k) {
    x1 = cir_exact_step(x1, p.a1, p.b11, p.sigma1, cfg.delta, engine);
    x2 = cir_exact_step(x2, p.a2, p.b22, p.sigma2, cfg.delta, engine);
    series.obs.push_back(floored(x1, x2));
  }
  return series;
}

ObservationSeries simulate(const SimConfig& cfg, Sampler sampler) {
  return sampler == Sampler::exact ? simulate_exact_diagonal(cfg) : simulate_path(cfg);
}

std::vector<Vec2> terminal_states(const SimConfig& cfg, double t, std::size_t n_paths, Sampler sampler,
                                  std::size_t first_path) {
  if (sampler == Sampler::exact) require_diagonal(cfg.params);
  cfg.validate();
  if (!(t >= 0.0)) throw Error(ErrorKind::Config, "t must be >= 0", t);
  const ModelParams& p = cfg.params;
  const auto steps = static_cast<std::size_t>(std::llround(t / cfg.euler_dt));
  std::vector<Vec2> out;
  out.reserve(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) {
    Engine engine = make_engine(stream_seed(cfg.seed, first_path + i));
    double x1 = cfg.x0.v1();
    double x2 = cfg.x0.v2();
    if (t > 0.0) {
      if (sampler == Sampler::exact) {
        x1 = cir_exact_step(x1, p.a1, p.b11, p.sigma1, t, engine);
        x2 = cir_exact_step(x2, p.a2, p.b22, p.sigma2, t, engine);
      } else {
        EulerStepper(p, cfg.euler_dt).advance(x1, x2, steps, engine);
      }
    }
    out.push_back(floored(x1, x2));
  }
  return out;
}

LaplaceCheckReport laplace_compare(const ModelParams& params, const Vec2& x0, const std::vector<Vec2>& terminal,
                                   const Vec2& lambda, double t) {
  LaplaceCheckReport r;
  r.lambda = lambda;
  r.t = t;
  r.n_paths = terminal.size();
  r.formula = transition_laplace(params, x0, lambda, t, t > 0.0 ? std::min(1e-3, t / 2000.0) : 1.0);
  if (terminal.empty()) throw Error(ErrorKind::InsufficientData, "no paths to compare");
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t count = 0;
  for (const Vec2& x : terminal) {
    const double y = std::exp(-dot(lambda, x));
    ++count;
    const double d = y - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (y - mean);
  }
  r.empirical = mean;
  const double var = count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  r.std_error = std::sqrt(var / static_cast<double>(count));
  const double diff = r.empirical - r.formula;
  if (r.std_error > 0.0) {
    r.z = diff / r.std_error;
  } else {
    r.z = std::abs(diff) <= 1e-15 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
  return r;
}

LaplaceCheckReport laplace_check(const SimConfig& cfg, const Vec2& lambda, double t, std::size_t n_paths,
                                 Sampler sampler) {
  return laplace_compare(cfg.params, cfg.x0, terminal_states(cfg, t, n_paths, sampler), lambda, t);
}

std::string series_to_csv(const ObservationSeries& series) {
  std::string out = "t,x1,x2\n";
  for (std::size_t k = 0; k < series.obs.size(); ++k) {
    const Vec2& x = series.obs[k];
    out += format_double(static_cast<double>(k) * series.delta);
    out += ',';
    out += format_double(x.v1());
    out += ',';
    out += format_double(x.v2());
    out += '\n';
  }
  return out;
}

ObservationSeries series_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "t,x1,x2") {
    throw Error(ErrorKind::ConfigParse, "series CSV must start with header 't,x1,x2'");
  }
  std::vector<double> times;
  ObservationSeries series;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 3) {
      throw Error(ErrorKind::ConfigParse, "series CSV row " + std::to_string(row) + " needs 3 columns");
    }
    const double x1 = parse_double(cells[1]);
    const double x2 = parse_double(cells[2]);
    if (x1 < 0.0 || x2 < 0.0) {
      throw Error(ErrorKind::Config, "series CSV row " + std::to_string(row) + " leaves the state space [0,inf)^2");
    }
    times.push_back(parse_double(cells[0]));
    series.obs.emplace_back(x1, x2);
  }
  if (times.size() < 2) throw Error(ErrorKind::InsufficientData, "series CSV needs at least two observations");
  series.delta = times[1] - times[0];
  if (!(series.delta > 0.0)) throw Error(ErrorKind::Config, "series times must increase", series.delta);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double expected = times[0] + static_cast<double>(k) * series.delta;
    if (std::abs(times[k] - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
      throw Error(ErrorKind::Config, "series times are not equally spaced", times[k]);
    }
  }
  return series;
}

void write_series_csv(const std::filesystem::path& path, const ObservationSeries& series) {
  write_text_file(path, series_to_csv(series));
}

ObservationSeries read_series_csv(const std::filesystem::path& path) { return series_from_csv(read_text_file(path)); }

}  // namespace cbi2
