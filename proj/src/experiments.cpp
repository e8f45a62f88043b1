#include "cbi2/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "cbi2/error.hpp"
#include "cbi2/rng.hpp"
#include "cbi2/text.hpp"

namespace cbi2 {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<const char*, 6> kRegressionNames{"rho1", "rho2", "gamma11", "gamma12", "gamma21", "gamma22"};

std::uint64_t parse_unsigned(const std::string& text) {
  const std::string token(trim(text));
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorKind::ConfigParse, "not an unsigned integer: '" + token + "'");
  }
  return value;
}

std::size_t parse_count(const std::string& text) { return static_cast<std::size_t>(parse_unsigned(text)); }

bool parse_bool(const std::string& text) {
  const std::string t(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw Error(ErrorKind::ConfigParse, "not a boolean: '" + t + "'");
}

Vec2 parse_vec2(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw Error(ErrorKind::ConfigParse, "expected two comma-separated numbers: '" + text + "'");
  return {parse_double(parts[0]), parse_double(parts[1])};
}

std::string vec2_text(const Vec2& v) { return format_double(v.v1()) + "," + format_double(v.v2()); }

template <typename T, typename F>
std::string join(const std::vector<T>& xs, const char* sep, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += sep;
    out += fmt(xs[i]);
  }
  return out;
}

double field(const McRow& row, const std::string& name) {
  for (const auto& [key, value] : row.fields) {
    if (key == name) return value;
  }
  throw Error(ErrorKind::ConfigParse, "estimates row lacks column '" + name + "'");
}

std::vector<std::pair<std::string, double>> nan_fields() {
  std::vector<std::pair<std::string, double>> f;
  for (const auto& name : report_field_names()) f.emplace_back(name, kNaN);
  for (const char* name : kRegressionNames) f.emplace_back(std::string("var_") + name, kNaN);
  return f;
}

void create_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

struct ArtifactWriter {
  ExperimentResult& result;

  void write(const std::string& name, const std::string& content) {
    const auto path = result.output_dir / name;
    write_text_file(path, content);
    result.files.push_back(path);
  }
};

std::string keyvalue(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

McRow estimate_row(const ObservationSeries& series, const WeightFn& g, const ExperimentConfig& cfg,
                   std::size_t replicate, std::uint64_t seed) {
  McRow row;
  row.replicate = replicate;
  row.seed = seed;
  row.n = series.n();
  try {
    const EstimateReport report =
        estimate_all(series, g, {cfg.rho_norm, cfg.covariance_enabled()});
    row.fields = report.fields();
    std::array<double, 6> var;
    var.fill(kNaN);
    if (report.sandwich) {
      const auto rc = regression_covariance(*report.sandwich, theta_hat(report.drift, *report.diffusion),
                                            series.delta);
      for (int i = 0; i < 6; ++i) var[i] = rc(i, i);
    }
    for (int i = 0; i < 6; ++i) row.fields.emplace_back(std::string("var_") + kRegressionNames[i], var[i]);
    if (!report.drift.admissible) row.status = to_string(ErrorKind::NonAdmissibleGamma);
  } catch (const Error& e) {
    row.status = to_string(e.kind());
    row.fields = nan_fields();
    for (auto& [name, value] : row.fields) {
      if (name == "n") value = static_cast<double>(series.n());
      if (name == "delta") value = series.delta;
    }
  }
  return row;
}

ObservationSeries prefix(const ObservationSeries& series, std::size_t n) {
  ObservationSeries out{series.delta, {series.obs.begin(), series.obs.begin() + static_cast<std::ptrdiff_t>(n + 1)},
                        series.meta};
  return out;
}

std::string series_summary(const ObservationSeries& s, Sampler sampler) {
  double min1 = std::numeric_limits<double>::infinity(), min2 = min1;
  double max1 = -min1, max2 = -min1;
  std::vector<double> x1, x2;
  for (const Vec2& x : s.obs) {
    x1.push_back(x.v1());
    x2.push_back(x.v2());
    min1 = std::min(min1, x.v1());
    min2 = std::min(min2, x.v2());
    max1 = std::max(max1, x.v1());
    max2 = std::max(max2, x.v2());
  }
  return keyvalue({{"sampler", to_string(sampler)},
                   {"observations", std::to_string(s.obs.size())},
                   {"delta", format_double(s.delta)},
                   {"mean_x1", format_double(mean(x1))},
                   {"mean_x2", format_double(mean(x2))},
                   {"var_x1", format_double(sample_variance(x1))},
                   {"var_x2", format_double(sample_variance(x2))},
                   {"min_x1", format_double(min1)},
                   {"min_x2", format_double(min2)},
                   {"max_x1", format_double(max1)},
                   {"max_x2", format_double(max2)}});
}

void run_simulate(const ExperimentConfig& cfg, ExperimentResult& result, ArtifactWriter& out) {
  result.series = simulate(cfg.sim, cfg.sampler);
  out.write("series.csv", series_to_csv(*result.series));
  out.write("summary.txt", series_summary(*result.series, cfg.sampler));
}

void run_estimate(const ExperimentConfig& cfg, ExperimentResult& result, ArtifactWriter& out) {
  if (cfg.estimate_input) {
    result.series = read_series_csv(*cfg.estimate_input);
  } else {
    result.series = simulate(cfg.sim, cfg.sampler);
    out.write("series.csv", series_to_csv(*result.series));
  }
  const WeightFn g = parse_weight(cfg.weight);
  result.estimate = estimate_all(*result.series, g, {cfg.rho_norm, cfg.covariance_enabled()});
  out.write("estimates.csv", report_csv_header() + "\n" + report_csv_row(*result.estimate) + "\n");
  out.write("summary.txt", report_to_keyvalue(*result.estimate));
  result.estimate->drift.require_admissible();
}

void run_mc_consistency(const ExperimentConfig& cfg, unsigned jobs, ExperimentResult& result, ArtifactWriter& out) {
  const WeightFn g = parse_weight(cfg.weight);
  const std::size_t n_max = cfg.n_grid.back();
  const std::size_t per = cfg.n_grid.size();
  result.rows.resize(cfg.replicates * per);
  parallel_for(cfg.replicates, jobs, [&](std::size_t r) {
    SimConfig sim = cfg.sim;
    sim.seed = stream_seed(cfg.seed(), r);
    sim.n_obs = n_max;
    const ObservationSeries series = simulate(sim, cfg.sampler);
    for (std::size_t j = 0; j < per; ++j) {
      result.rows[r * per + j] = estimate_row(prefix(series, cfg.n_grid[j]), g, cfg, r, sim.seed);
    }
  });
  out.write("estimates.csv", mc_csv(result.rows));
  result.consistency = summarize_consistency(result.rows, cfg.sim.params, cfg.n_grid, cfg.sim.delta);
  out.write("summary.txt", consistency_summary_text(*result.consistency));
  std::string plot = "n,median_drift_error,rmse_drift_error,median_abs_error_sigma1_sq,median_abs_error_sigma2_sq\n";
  for (const auto& row : result.consistency->rows) {
    plot += std::to_string(row.n) + "," + format_double(row.median_drift_error) + "," +
            format_double(row.rmse_drift_error) + "," + format_double(row.median_abs_error_sigma1_sq) + "," +
            format_double(row.median_abs_error_sigma2_sq) + "\n";
  }
  out.write("plotdata_consistency.csv", plot);
}

std::vector<double> scaled_errors(const std::vector<McRow>& rows, const std::string& name, double truth,
                                  bool sqrt_of_field) {
  std::vector<double> out;
  for (const auto& row : rows) {
    double v = field(row, name);
    if (sqrt_of_field) v = std::sqrt(v);
    out.push_back(std::sqrt(static_cast<double>(row.n)) * (v - truth));
  }
  return out;
}

void run_mc_clt(const ExperimentConfig& cfg, unsigned jobs, ExperimentResult& result, ArtifactWriter& out) {
  const WeightFn g = parse_weight(cfg.weight);
  result.rows.resize(cfg.replicates);
  parallel_for(cfg.replicates, jobs, [&](std::size_t r) {
    SimConfig sim = cfg.sim;
    sim.seed = stream_seed(cfg.seed(), r);
    result.rows[r] = estimate_row(simulate(sim, cfg.sampler), g, cfg, r, sim.seed);
  });
  out.write("estimates.csv", mc_csv(result.rows));
  result.clt = summarize_clt(result.rows, cfg.sim.params, cfg.sim.delta);
  out.write("summary.txt", clt_summary_text(*result.clt));
  if (result.clt->used < 3) return;

  std::vector<McRow> ok;
  for (const auto& row : result.rows) {
    if (row.status == "ok") ok.push_back(row);
  }
  for (const auto& m : result.clt->marginals) {
    const bool is_sigma = m.name == "sigma1" || m.name == "sigma2";
    const std::string column = is_sigma ? m.name + "_sq" : m.name;
    const std::vector<double> errs = scaled_errors(ok, column, m.truth, is_sigma);
    const double mu = cbi2::mean(errs);
    const double sd = std::sqrt(sample_variance(errs));
    std::vector<double> z;
    for (double e : errs) z.push_back(sd > 0.0 ? (e - mu) / sd : 0.0);
    std::string plot = "normal_quantile,standardized\n";
    for (const auto& [q, s] : qq_normal(z)) plot += format_double(q) + "," + format_double(s) + "\n";
    out.write("plotdata_qq_" + m.name + ".csv", plot);
  }
}

void run_laplace_check(const ExperimentConfig& cfg, unsigned jobs, ExperimentResult& result, ArtifactWriter& out) {
  constexpr std::size_t kChunk = 1000;
  const std::size_t chunks = (cfg.laplace_n_paths + kChunk - 1) / kChunk;
  std::vector<std::vector<Vec2>> parts(chunks);
  parallel_for(chunks, jobs, [&](std::size_t c) {
    const std::size_t first = c * kChunk;
    const std::size_t count = std::min(kChunk, cfg.laplace_n_paths - first);
    parts[c] = terminal_states(cfg.sim, cfg.laplace_t, count, cfg.sampler, first);
  });
  std::vector<Vec2> terminal;
  terminal.reserve(cfg.laplace_n_paths);
  for (auto& p : parts) terminal.insert(terminal.end(), p.begin(), p.end());

  std::string plot = "lambda1,lambda2,scale,t,formula,empirical,std_error,z\n";
  double max_abs_z = 0.0;
  for (const Vec2& base : cfg.laplace_lambdas) {
    for (double scale : cfg.laplace_scales) {
      const Vec2 lambda = scale * base;
      LaplaceRow row{base, scale, laplace_compare(cfg.sim.params, cfg.sim.x0, terminal, lambda, cfg.laplace_t)};
      max_abs_z = std::max(max_abs_z, std::abs(row.report.z));
      plot += format_double(base.v1()) + "," + format_double(base.v2()) + "," + format_double(scale) + "," +
              format_double(cfg.laplace_t) + "," + format_double(row.report.formula) + "," +
              format_double(row.report.empirical) + "," + format_double(row.report.std_error) + "," +
              format_double(row.report.z) + "\n";
      result.laplace.push_back(row);
    }
  }
  out.write("plotdata_laplace.csv", plot);
  std::vector<std::pair<std::string, std::string>> summary{{"sampler", to_string(cfg.sampler)},
                                                           {"n_paths", std::to_string(cfg.laplace_n_paths)},
                                                           {"t", format_double(cfg.laplace_t)},
                                                           {"max_abs_z", format_double(max_abs_z)}};
  for (const auto& row : result.laplace) {
    const std::string key = "z[" + vec2_text(row.report.lambda) + "]";
    summary.emplace_back(key, format_double(row.report.z));
  }
  out.write("summary.txt", keyvalue(summary));
}

}  // namespace

const char* to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::estimate: return "estimate";
    case ExperimentKind::mc_consistency: return "mc_consistency";
    case ExperimentKind::mc_clt: return "mc_clt";
    case ExperimentKind::laplace_check: return "laplace_check";
  }
  return "simulate";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  std::string t = text;
  std::replace(t.begin(), t.end(), '-', '_');
  for (auto k : {ExperimentKind::simulate, ExperimentKind::estimate, ExperimentKind::mc_consistency,
                 ExperimentKind::mc_clt, ExperimentKind::laplace_check}) {
    if (t == to_string(k)) return k;
  }
  throw Error(ErrorKind::ConfigParse, "unknown experiment kind '" + text + "'");
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigParse, "line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    if (key.empty()) throw Error(ErrorKind::ConfigParse, "line " + std::to_string(number) + ": empty key");
    out[key] = value;
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) { return parse_config_text(read_text_file(path)); }

bool ExperimentConfig::covariance_enabled() const noexcept {
  return covariance.value_or(kind != ExperimentKind::mc_consistency);
}

void ExperimentConfig::validate() const {
  sim.validate();
  if (sampler == Sampler::exact && !sim.params.is_diagonal()) {
    throw Error(ErrorKind::NotDiagonal, "sim.sampler = exact requires model.b12 = model.b21 = 0");
  }
  parse_weight(weight);
  if (kind == ExperimentKind::mc_consistency || kind == ExperimentKind::mc_clt) {
    if (replicates < 1) throw Error(ErrorKind::Config, "replicates must be >= 1");
  }
  if (kind == ExperimentKind::mc_consistency) {
    if (n_grid.empty()) throw Error(ErrorKind::Config, "n_grid must not be empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 3) throw Error(ErrorKind::Config, "n_grid entries must be >= 3");
      if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw Error(ErrorKind::Config, "n_grid must be strictly increasing");
    }
  }
  if (kind == ExperimentKind::laplace_check) {
    if (laplace_lambdas.empty()) throw Error(ErrorKind::Config, "laplace.lambda must not be empty");
    for (const Vec2& l : laplace_lambdas) {
      if (l.v1() < 0.0 || l.v2() < 0.0) throw Error(ErrorKind::Config, "laplace.lambda must be nonnegative");
    }
    for (double s : laplace_scales) {
      if (!(s >= 0.0)) throw Error(ErrorKind::Config, "laplace.scales must be nonnegative", s);
    }
    if (!(laplace_t >= 0.0)) throw Error(ErrorKind::Config, "laplace.t must be >= 0", laplace_t);
    if (laplace_n_paths < 2) throw Error(ErrorKind::Config, "laplace.n_paths must be >= 2");
  }
}

ExperimentConfig config_from_map(const ConfigMap& settings) {
  ExperimentConfig cfg;
  auto& p = cfg.sim.params;
  const std::map<std::string, std::function<void(const std::string&)>> handlers{
      {"kind", [&](const std::string& v) { cfg.kind = parse_experiment_kind(v); }},
      {"seed", [&](const std::string& v) { cfg.sim.seed = parse_unsigned(v); }},
      {"output_dir", [&](const std::string& v) { cfg.output_dir = v; }},
      {"weight", [&](const std::string& v) { cfg.weight = v; }},
      {"rho_normalization", [&](const std::string& v) { cfg.rho_norm = parse_rho_normalization(v); }},
      {"replicates", [&](const std::string& v) { cfg.replicates = parse_count(v); }},
      {"n_grid",
       [&](const std::string& v) {
         cfg.n_grid.clear();
         for (const auto& part : split(v, ',')) cfg.n_grid.push_back(parse_count(part));
       }},
      {"model.a1", [&](const std::string& v) { p.a1 = parse_double(v); }},
      {"model.a2", [&](const std::string& v) { p.a2 = parse_double(v); }},
      {"model.b11", [&](const std::string& v) { p.b11 = parse_double(v); }},
      {"model.b12", [&](const std::string& v) { p.b12 = parse_double(v); }},
      {"model.b21", [&](const std::string& v) { p.b21 = parse_double(v); }},
      {"model.b22", [&](const std::string& v) { p.b22 = parse_double(v); }},
      {"model.sigma1", [&](const std::string& v) { p.sigma1 = parse_double(v); }},
      {"model.sigma2", [&](const std::string& v) { p.sigma2 = parse_double(v); }},
      {"sim.euler_dt", [&](const std::string& v) { cfg.sim.euler_dt = parse_double(v); }},
      {"sim.delta", [&](const std::string& v) { cfg.sim.delta = parse_double(v); }},
      {"sim.n_obs", [&](const std::string& v) { cfg.sim.n_obs = parse_count(v); }},
      {"sim.burn_in",
       [&](const std::string& v) {
         if (trim(v) == "auto") {
           cfg.sim.burn_in.reset();
         } else {
           cfg.sim.burn_in = parse_double(v);
         }
       }},
      {"sim.x0", [&](const std::string& v) { cfg.sim.x0 = parse_vec2(v); }},
      {"sim.sampler", [&](const std::string& v) { cfg.sampler = parse_sampler(v); }},
      {"estimate.input",
       [&](const std::string& v) {
         if (v.empty()) {
           cfg.estimate_input.reset();
         } else {
           cfg.estimate_input = std::filesystem::path(v);
         }
       }},
      {"estimate.covariance", [&](const std::string& v) { cfg.covariance = parse_bool(v); }},
      {"laplace.lambda",
       [&](const std::string& v) {
         cfg.laplace_lambdas.clear();
         for (const auto& part : split(v, ';')) cfg.laplace_lambdas.push_back(parse_vec2(part));
       }},
      {"laplace.scales",
       [&](const std::string& v) {
         cfg.laplace_scales.clear();
         for (const auto& part : split(v, ',')) cfg.laplace_scales.push_back(parse_double(part));
       }},
      {"laplace.t", [&](const std::string& v) { cfg.laplace_t = parse_double(v); }},
      {"laplace.n_paths", [&](const std::string& v) { cfg.laplace_n_paths = parse_count(v); }},
  };
  // kind first so that kind-dependent defaults see it.
  if (auto it = settings.find("kind"); it != settings.end()) handlers.at("kind")(it->second);
  for (const auto& [key, value] : settings) {
    const auto h = handlers.find(key);
    if (h == handlers.end()) throw Error(ErrorKind::ConfigParse, "unknown config key '" + key + "'");
    try {
      h->second(value);
    } catch (const Error& e) {
      throw Error(e.kind(), key + ": " + e.what(), e.value());
    }
  }
  cfg.validate();
  return cfg;
}

std::string resolved_config_text(const ExperimentConfig& cfg) {
  const auto& p = cfg.sim.params;
  std::vector<std::pair<std::string, std::string>> e{
      {"kind", to_string(cfg.kind)},
      {"seed", std::to_string(cfg.seed())},
      {"output_dir", cfg.output_dir.string()},
      {"weight", cfg.weight},
      {"rho_normalization", to_string(cfg.rho_norm)},
      {"replicates", std::to_string(cfg.replicates)},
      {"n_grid", join(cfg.n_grid, ",", [](std::size_t n) { return std::to_string(n); })},
      {"model.a1", format_double(p.a1)},
      {"model.a2", format_double(p.a2)},
      {"model.b11", format_double(p.b11)},
      {"model.b12", format_double(p.b12)},
      {"model.b21", format_double(p.b21)},
      {"model.b22", format_double(p.b22)},
      {"model.sigma1", format_double(p.sigma1)},
      {"model.sigma2", format_double(p.sigma2)},
      {"sim.euler_dt", format_double(cfg.sim.euler_dt)},
      {"sim.delta", format_double(cfg.sim.delta)},
      {"sim.n_obs", std::to_string(cfg.sim.n_obs)},
      {"sim.burn_in", format_double(cfg.sim.resolved_burn_in())},
      {"sim.x0", vec2_text(cfg.sim.x0)},
      {"sim.sampler", to_string(cfg.sampler)},
      {"estimate.input", cfg.estimate_input ? cfg.estimate_input->string() : ""},
      {"estimate.covariance", cfg.covariance_enabled() ? "true" : "false"},
      {"laplace.lambda", join(cfg.laplace_lambdas, ";", vec2_text)},
      {"laplace.scales", join(cfg.laplace_scales, ",", [](double s) { return format_double(s); })},
      {"laplace.t", format_double(cfg.laplace_t)},
      {"laplace.n_paths", std::to_string(cfg.laplace_n_paths)},
  };
  return keyvalue(e);
}

const MarginalSummary& CltSummary::at(const std::string& name) const {
  for (const auto& m : marginals) {
    if (m.name == name) return m;
  }
  throw Error(ErrorKind::Config, "no marginal named '" + name + "'");
}

unsigned default_jobs() noexcept { return std::max(1u, std::thread::hardware_concurrency()); }

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task) {
  if (jobs == 0) jobs = default_jobs();
  const std::size_t workers = std::min<std::size_t>(jobs, count);
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::string> mc_column_names() {
  std::vector<std::string> names{"replicate", "seed", "status"};
  for (const auto& name : report_field_names()) names.push_back(name);
  for (const char* name : kRegressionNames) names.push_back(std::string("var_") + name);
  return names;
}

std::string mc_csv(const std::vector<McRow>& rows) {
  std::string out = join(mc_column_names(), ",", [](const std::string& s) { return s; }) + "\n";
  for (const auto& row : rows) {
    out += std::to_string(row.replicate) + "," + std::to_string(row.seed) + "," + row.status;
    for (const auto& [name, value] : row.fields) out += "," + format_double(value);
    out += "\n";
  }
  return out;
}

std::vector<McRow> parse_mc_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ConfigParse, "estimates CSV is empty");
  const auto header = split(line, ',');
  if (header != mc_column_names()) throw Error(ErrorKind::ConfigParse, "estimates CSV header does not match");
  std::vector<McRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw Error(ErrorKind::ConfigParse, "estimates CSV row has wrong width");
    McRow row;
    row.replicate = parse_count(cells[0]);
    row.seed = parse_unsigned(cells[1]);
    row.status = cells[2];
    for (std::size_t i = 3; i < cells.size(); ++i) row.fields.emplace_back(header[i], parse_double(cells[i]));
    row.n = static_cast<std::size_t>(field(row, "n"));
    rows.push_back(std::move(row));
  }
  return rows;
}

ConsistencySummary summarize_consistency(const std::vector<McRow>& rows, const ModelParams& truth,
                                         const std::vector<std::size_t>& n_grid, double delta) {
  const Regression reg = regression_coefficients(truth, delta);
  const std::array<double, 6> target{reg.rho.v1(),    reg.rho.v2(),    reg.gamma.m11(),
                                     reg.gamma.m12(), reg.gamma.m21(), reg.gamma.m22()};
  const double s1 = truth.sigma1 * truth.sigma1;
  const double s2 = truth.sigma2 * truth.sigma2;
  ConsistencySummary out;
  for (std::size_t n : n_grid) {
    std::vector<double> drift, e1, e2;
    for (const auto& row : rows) {
      if (row.n != n || row.status != "ok") continue;
      double err = 0.0;
      for (std::size_t i = 0; i < 6; ++i) err = std::max(err, std::abs(field(row, kRegressionNames[i]) - target[i]));
      drift.push_back(err);
      e1.push_back(std::abs(field(row, "sigma1_sq") - s1));
      e2.push_back(std::abs(field(row, "sigma2_sq") - s2));
    }
    out.rows.push_back({n, drift.size(), median(drift), root_mean_square(drift), median(e1), median(e2)});
  }
  out.monotone = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (!(out.rows[i].median_drift_error < out.rows[i - 1].median_drift_error)) out.monotone = false;
  }
  out.ratio = out.rows.empty() ? kNaN : out.rows.front().median_drift_error / out.rows.back().median_drift_error;
  return out;
}

CltSummary summarize_clt(const std::vector<McRow>& rows, const ModelParams& truth, double delta) {
  std::vector<McRow> ok;
  for (const auto& row : rows) {
    if (row.status == "ok") ok.push_back(row);
  }
  CltSummary out;
  out.n = ok.empty() ? 0 : ok.front().n;
  out.used = ok.size();
  const double m = static_cast<double>(ok.size());

  auto marginal = [&](const std::string& name, const std::string& column, double truth_value, bool is_sigma,
                      const std::string& var_column) {
    MarginalSummary s;
    s.name = name;
    s.truth = truth_value;
    std::vector<double> est, scaled, sandwich;
    for (const auto& row : ok) {
      const double v = is_sigma ? std::sqrt(field(row, column)) : field(row, column);
      est.push_back(v);
      scaled.push_back(std::sqrt(static_cast<double>(row.n)) * (v - truth_value));
      sandwich.push_back(static_cast<double>(row.n) * field(row, var_column));
    }
    s.mean = cbi2::mean(est);
    s.bias = s.mean - truth_value;
    s.std_error = std::sqrt(sample_variance(est) / m);
    s.empirical_var = sample_variance(scaled);
    s.sandwich_var = cbi2::mean(sandwich);
    s.var_ratio = s.empirical_var / s.sandwich_var;
    if (ok.size() >= 3) {
      try {
        s.ks = ks_test_studentized(scaled);
      } catch (const Error&) {
        s.ks = {kNaN, kNaN, ok.size()};
      }
    } else {
      s.ks = {kNaN, kNaN, ok.size()};
    }
    out.marginals.push_back(s);
  };

  const auto theta = truth.to_array();
  for (std::size_t i = 0; i < ModelParams::size; ++i) {
    const std::string name(ModelParams::names[i]);
    const bool is_sigma = i >= 6;
    const std::string cov = "cov_" + std::to_string(i + 1) + std::to_string(i + 1);
    marginal(name, is_sigma ? name + "_sq" : name, theta[i], is_sigma, cov);
  }
  const Regression reg = regression_coefficients(truth, delta);
  const std::array<double, 6> target{reg.rho.v1(),    reg.rho.v2(),    reg.gamma.m11(),
                                     reg.gamma.m12(), reg.gamma.m21(), reg.gamma.m22()};
  for (std::size_t i = 0; i < 6; ++i) {
    marginal(kRegressionNames[i], kRegressionNames[i], target[i], false, std::string("var_") + kRegressionNames[i]);
  }
  return out;
}

std::string consistency_summary_text(const ConsistencySummary& s) {
  std::vector<std::pair<std::string, std::string>> e;
  for (const auto& row : s.rows) {
    const std::string p = "n" + std::to_string(row.n) + ".";
    e.emplace_back(p + "used", std::to_string(row.used));
    e.emplace_back(p + "median_drift_error", format_double(row.median_drift_error));
    e.emplace_back(p + "rmse_drift_error", format_double(row.rmse_drift_error));
    e.emplace_back(p + "median_abs_error_sigma1_sq", format_double(row.median_abs_error_sigma1_sq));
    e.emplace_back(p + "median_abs_error_sigma2_sq", format_double(row.median_abs_error_sigma2_sq));
  }
  e.emplace_back("ratio_first_last", format_double(s.ratio));
  e.emplace_back("monotone", s.monotone ? "1" : "0");
  return keyvalue(e);
}

std::string clt_summary_text(const CltSummary& s) {
  std::vector<std::pair<std::string, std::string>> e{{"n", std::to_string(s.n)}, {"used", std::to_string(s.used)}};
  for (const auto& m : s.marginals) {
    e.emplace_back(m.name + ".truth", format_double(m.truth));
    e.emplace_back(m.name + ".mean", format_double(m.mean));
    e.emplace_back(m.name + ".bias", format_double(m.bias));
    e.emplace_back(m.name + ".std_error", format_double(m.std_error));
    e.emplace_back(m.name + ".empirical_var", format_double(m.empirical_var));
    e.emplace_back(m.name + ".sandwich_var", format_double(m.sandwich_var));
    e.emplace_back(m.name + ".var_ratio", format_double(m.var_ratio));
    e.emplace_back(m.name + ".ks_statistic", format_double(m.ks.statistic));
    e.emplace_back(m.name + ".ks_p", format_double(m.ks.p_value));
  }
  return keyvalue(e);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned jobs) {
  cfg.validate();
  ExperimentResult result;
  result.kind = cfg.kind;
  result.output_dir = cfg.output_dir;
  create_output_dir(cfg.output_dir);
  ArtifactWriter out{result};
  out.write("resolved_config.txt", resolved_config_text(cfg));
  switch (cfg.kind) {
    case ExperimentKind::simulate: run_simulate(cfg, result, out); break;
    case ExperimentKind::estimate: run_estimate(cfg, result, out); break;
    case ExperimentKind::mc_consistency: run_mc_consistency(cfg, jobs, result, out); break;
    case ExperimentKind::mc_clt: run_mc_clt(cfg, jobs, result, out); break;
    case ExperimentKind::laplace_check: run_laplace_check(cfg, jobs, result, out); break;
  }
  return result;
}

}  // namespace cbi2
