#include "cbi2/estimate.hpp"

#include <cmath>
#include <limits>

#include "cbi2/error.hpp"
#include "cbi2/stats.hpp"
#include "cbi2/text.hpp"

namespace cbi2 {

namespace {

template <int R, int C>
class CompensatedMatrix {
 public:
  template <typename Derived>
  void add(const Eigen::MatrixBase<Derived>& m) {
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) sums_[i * C + j].add(m(i, j));
  }
  Eigen::Matrix<double, R, C> value() const {
    Eigen::Matrix<double, R, C> out;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) out(i, j) = sums_[i * C + j].value();
    return out;
  }

 private:
  std::array<CompensatedSum, R * C> sums_{};
};

struct Vec2Sum {
  CompensatedSum c1, c2;
  void add(const Vec2& v) {
    c1.add(v.v1());
    c2.add(v.v2());
  }
  Vec2 mean(double n) const { return {c1.value() / n, c2.value() / n}; }
};

struct Mat2Sum {
  CompensatedSum c11, c12, c21, c22;
  void add(const Mat2& m) {
    c11.add(m.m11());
    c12.add(m.m12());
    c21.add(m.m21());
    c22.add(m.m22());
  }
  Mat2 mean(double n) const { return {c11.value() / n, c12.value() / n, c21.value() / n, c22.value() / n}; }
};

void require_transitions(const ObservationSeries& series, std::size_t minimum = 3) {
  if (series.n() < minimum) {
    throw Error(ErrorKind::InsufficientData, "need at least " + std::to_string(minimum) + " transitions",
                static_cast<double>(series.n()));
  }
}

Eigen::Vector4d to_eigen(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
Eigen::Vector2d to_eigen(const Vec2& v) { return {v.v1(), v.v2()}; }

// Everything the estimating equation needs at one parameter point.
struct ThetaPoint {
  Regression reg;
  EtaBasis basis;
  double s1_sq;
  double s2_sq;

  ThetaPoint(const Theta& theta, double delta)
      : reg(regression_coefficients(ModelParams::from_array(theta), delta)),
        basis(ModelParams::from_array(theta), delta),
        s1_sq(theta[6] * theta[6]),
        s2_sq(theta[7] * theta[7]) {}

  Vec2 mean(const Vec2& x) const { return reg.rho + reg.gamma * x; }
  Mat2 variance(const Vec2& x) const { return basis.variance(x, s1_sq, s2_sq); }
};

double fd_step(double theta_i) { return kDerivativeStep * (1.0 + std::abs(theta_i)); }

struct PerturbedPoints {
  std::vector<ThetaPoint> plus;
  std::vector<ThetaPoint> minus;
  std::array<double, ModelParams::size> step{};

  PerturbedPoints(const Theta& theta, double delta) {
    plus.reserve(ModelParams::size);
    minus.reserve(ModelParams::size);
    for (std::size_t i = 0; i < ModelParams::size; ++i) {
      step[i] = fd_step(theta[i]);
      Theta up = theta;
      Theta down = theta;
      up[i] += step[i];
      down[i] -= step[i];
      plus.emplace_back(up, delta);
      minus.emplace_back(down, delta);
    }
  }
};

// w0 (8x2) and w1 (8x4) at state x.
struct Weights {
  Eigen::Matrix<double, 8, 2> w0 = Eigen::Matrix<double, 8, 2>::Zero();
  Eigen::Matrix<double, 8, 4> w1 = Eigen::Matrix<double, 8, 4>::Zero();
};

Weights estimating_weights(const Eigen::Matrix<double, 2, 8>& dm, const EtaPair& eta) {
  Weights w;
  // Rows for the drift parameters carry dm/dtheta; the sigma rows of w0 are
  // zero and w1 is nonzero only there.
  w.w0.topRows<6>() = dm.leftCols<6>().transpose();
  w.w1.row(6) = to_eigen(vec(eta.eta1)).transpose();
  w.w1.row(7) = to_eigen(vec(eta.eta2)).transpose();
  return w;
}

Eigen::Matrix<double, 2, 8> mean_jacobian_at(const PerturbedPoints& pts, const Vec2& x) {
  Eigen::Matrix<double, 2, 8> dm;
  for (std::size_t i = 0; i < ModelParams::size; ++i) {
    const Vec2 d = (pts.plus[i].mean(x) - pts.minus[i].mean(x)) / (2.0 * pts.step[i]);
    dm(0, i) = d.v1();
    dm(1, i) = d.v2();
  }
  return dm;
}

Eigen::Matrix<double, 4, 8> variance_jacobian_at(const PerturbedPoints& pts, const Vec2& x) {
  Eigen::Matrix<double, 4, 8> dv;
  for (std::size_t i = 0; i < ModelParams::size; ++i) {
    const Vec4 d = (1.0 / (2.0 * pts.step[i])) * vec(pts.plus[i].variance(x) - pts.minus[i].variance(x));
    dv.col(i) = to_eigen(d);
  }
  return dv;
}

Vector8 summand(const Weights& w, const Vec2& resid, const Mat2& z, const Mat2& v) {
  return w.w0 * to_eigen(resid) + w.w1 * to_eigen(vec(z - v));
}

}  // namespace

WeightFn::WeightFn(WeightKind kind, std::function<double(const Vec2&)> rule, std::string name)
    : kind_(kind), rule_(std::move(rule)), name_(std::move(name)) {}

WeightFn WeightFn::constant() {
  return WeightFn(WeightKind::constant, [](const Vec2&) { return 1.0; }, "constant");
}

WeightFn WeightFn::inverse_norm() {
  return WeightFn(WeightKind::inverse_norm, [](const Vec2& x) { return 1.0 / (1.0 + norm(x)); }, "inverse_norm");
}

WeightFn WeightFn::custom(std::function<double(const Vec2&)> rule, std::string name) {
  return WeightFn(WeightKind::custom, std::move(rule), std::move(name));
}

double WeightFn::operator()(const Vec2& x) const {
  const double w = rule_(x);
  if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorKind::Config, "weight must be positive and finite", w);
  return w;
}

WeightFn parse_weight(const std::string& name) {
  if (name == "constant") return WeightFn::constant();
  if (name == "inverse_norm") return WeightFn::inverse_norm();
  throw Error(ErrorKind::ConfigParse, "unknown weight '" + name + "' (expected constant or inverse_norm)");
}

const char* to_string(RhoNormalization r) noexcept { return r == RhoNormalization::divide ? "divide" : "multiply"; }

RhoNormalization parse_rho_normalization(const std::string& text) {
  if (text == "divide") return RhoNormalization::divide;
  if (text == "multiply") return RhoNormalization::multiply;
  throw Error(ErrorKind::ConfigParse, "unknown rho normalization '" + text + "' (expected divide or multiply)");
}

DriftStatistics drift_statistics(const ObservationSeries& series, const WeightFn& g) {
  require_transitions(series, 2);
  const std::size_t n = series.n();
  const double nd = static_cast<double>(n);
  const auto& x = series.obs;

  std::vector<double> weights(n);
  CompensatedSum g_sum;
  Vec2Sum gx_sum, gxprev_sum;
  Mat2Sum cross_sum, prev_sum;
  for (std::size_t k = 1; k <= n; ++k) {
    const double gk = g(x[k - 1]);
    weights[k - 1] = gk;
    g_sum.add(gk);
    gx_sum.add(gk * x[k]);
    gxprev_sum.add(gk * x[k - 1]);
    cross_sum.add(gk * outer(x[k], x[k - 1]));
    prev_sum.add(gk * outer(x[k - 1], x[k - 1]));
  }

  DriftStatistics st;
  st.n = n;
  st.g_bar = g_sum.value() / nd;
  st.x_bar = gx_sum.mean(nd);
  st.x_tilde = gxprev_sum.mean(nd);
  const Mat2 cross_mean = cross_sum.mean(nd);
  const Mat2 prev_mean = prev_sum.mean(nd);

  Mat2Sum t1b, t1t, t2b, t2t;
  for (std::size_t k = 1; k <= n; ++k) {
    const double gk = weights[k - 1];
    const Vec2 cur = gk * x[k] - st.x_bar;
    const Vec2 prev = gk * x[k - 1] - st.x_tilde;
    const double dg = gk - st.g_bar;
    t1b.add(outer(cur, prev));
    t1t.add(dg * (gk * outer(x[k], x[k - 1]) - cross_mean));
    t2b.add(outer(prev, prev));
    t2t.add(dg * (gk * outer(x[k - 1], x[k - 1]) - prev_mean));
  }
  st.t1_bar = t1b.mean(nd);
  st.t1_tilde = t1t.mean(nd);
  st.t2_bar = t2b.mean(nd);
  st.t2_tilde = t2t.mean(nd);
  return st;
}

void DriftEstimate::require_admissible() const {
  if (!admissible) {
    throw Error(ErrorKind::NonAdmissibleGamma,
                "gamma_hat has an eigenvalue outside the unit disk or the right half-plane; sample may be too short",
                spectral_radius(gamma_hat));
  }
}

ModelParams DriftEstimate::as_params(double sigma1, double sigma2) const {
  require_admissible();
  return ModelParams::from_drift(*a_hat, *b_hat, sigma1, sigma2);
}

bool gamma_admissible(const Mat2& gamma) {
  const auto [e1, e2] = eigenvalues(gamma);
  for (const auto& e : {e1, e2}) {
    if (!(e.real() > 0.0) || !(std::abs(e) < 1.0)) return false;
  }
  return true;
}

DriftEstimate estimate_drift(const ObservationSeries& series, const WeightFn& g, RhoNormalization rho_norm) {
  require_transitions(series);
  const DriftStatistics st = drift_statistics(series, g);
  const Mat2 numerator = st.t1_bar - st.t1_tilde;
  const Mat2 design = st.t2_bar - st.t2_tilde;
  Mat2 design_inv;
  try {
    design_inv = inverse(design);
  } catch (const Error& e) {
    throw Error(ErrorKind::SingularDesign, "regression design is singular (constant or degenerate observations)",
                e.value());
  }

  DriftEstimate est;
  est.n = st.n;
  est.delta = series.delta;
  est.gamma_hat = numerator * design_inv;
  const Vec2 centered = st.x_bar - est.gamma_hat * st.x_tilde;
  est.rho_hat = rho_norm == RhoNormalization::divide ? centered / st.g_bar : st.g_bar * centered;
  est.admissible = gamma_admissible(est.gamma_hat);
  if (est.admissible) {
    const Mat2 b = (-1.0 / series.delta) * logm(est.gamma_hat);
    est.b_hat = b;
    est.a_hat = b * (inverse(Mat2::identity() - est.gamma_hat) * est.rho_hat);
  }
  return est;
}

DiffusionEstimate estimate_diffusion(const ObservationSeries& series, const WeightFn& g, const DriftEstimate& drift) {
  drift.require_admissible();
  const EtaBasis basis(drift.as_params(1.0, 1.0), series.delta);
  return estimate_diffusion(series, g, drift, [&basis](const Vec2& x) { return basis.at(x); });
}

DiffusionEstimate estimate_diffusion(const ObservationSeries& series, const WeightFn& g, const DriftEstimate& drift,
                                     const EtaProvider& eta) {
  require_transitions(series);
  const auto& x = series.obs;
  const std::size_t n = series.n();
  std::vector<Mat2> z;
  std::vector<EtaPair> etas;
  std::vector<double> weights;
  z.reserve(n);
  etas.reserve(n);
  weights.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const Vec2 resid = x[k] - (drift.rho_hat + drift.gamma_hat * x[k - 1]);
    z.push_back(outer(resid, resid));
    etas.push_back(eta(x[k - 1]));
    weights.push_back(g(x[k - 1]));
  }
  return diffusion_normal_equations(z, etas, weights);
}

DiffusionEstimate diffusion_normal_equations(const std::vector<Mat2>& z, const std::vector<EtaPair>& eta,
                                             const std::vector<double>& g) {
  if (z.size() != eta.size() || z.size() != g.size() || z.empty()) {
    throw Error(ErrorKind::InsufficientData, "normal equations need matching, nonempty inputs");
  }
  const double nd = static_cast<double>(z.size());
  CompensatedSum m11, m12, m22, r1, r2;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const Vec4 zk = vec(z[k]);
    const Vec4 e1 = vec(eta[k].eta1);
    const Vec4 e2 = vec(eta[k].eta2);
    m11.add(g[k] * dot(e1, e1));
    m12.add(g[k] * dot(e1, e2));
    m22.add(g[k] * dot(e2, e2));
    r1.add(g[k] * dot(zk, e1));
    r2.add(g[k] * dot(zk, e2));
  }
  const double a11 = m11.value() / nd;
  const double a12 = m12.value() / nd;
  const double a22 = m22.value() / nd;
  const double b1 = r1.value() / nd;
  const double b2 = r2.value() / nd;
  const double det = a11 * a22 - a12 * a12;
  if (!(det >= 1e-12 * a11 * a22) || !(det > 0.0)) {
    throw Error(ErrorKind::IllConditioned, "diffusion normal equations are ill-conditioned", det);
  }
  DiffusionEstimate out;
  out.conditioning = det;
  out.sigma1_sq_raw = (b1 * a22 - b2 * a12) / det;
  out.sigma2_sq_raw = (a11 * b2 - a12 * b1) / det;
  out.sigma1_sq = std::max(out.sigma1_sq_raw, 0.0);
  out.sigma2_sq = std::max(out.sigma2_sq_raw, 0.0);
  return out;
}

std::pair<double, double> diffusion_fixed_eta(const ObservationSeries& series, const WeightFn& g,
                                              const DriftEstimate& drift, const EtaPair& eta) {
  require_transitions(series);
  const auto& x = series.obs;
  const std::size_t n = series.n();
  const double nd = static_cast<double>(n);
  const Vec4 e1 = vec(eta.eta1);
  const Vec4 e2 = vec(eta.eta2);
  const double e11 = dot(e1, e1);
  const double e12 = dot(e1, e2);
  const double e22 = dot(e2, e2);
  CompensatedSum phi11, phi12, phi21, phi22, g_sum;
  for (std::size_t k = 1; k <= n; ++k) {
    const double gk = g(x[k - 1]);
    const Vec2 resid = x[k] - (drift.rho_hat + drift.gamma_hat * x[k - 1]);
    const Vec4 z = vec(outer(resid, resid));
    phi11.add(gk * dot(z, e1) * e22);
    phi12.add(gk * dot(z, e2) * e12);
    phi21.add(gk * dot(z, e2) * e11);
    phi22.add(gk * dot(z, e1) * e12);
    g_sum.add(gk);
  }
  const double psi = (g_sum.value() / nd) * (e11 * e22 - e12 * e12);
  return {(phi11.value() / nd - phi12.value() / nd) / psi, (phi21.value() / nd - phi22.value() / nd) / psi};
}

Theta theta_hat(const DriftEstimate& drift, const DiffusionEstimate& diffusion) {
  const ModelParams p = drift.as_params(std::sqrt(diffusion.sigma1_sq), std::sqrt(diffusion.sigma2_sq));
  return p.to_array();
}

Eigen::Matrix<double, 2, 8> mean_jacobian(const Theta& theta, const Vec2& x, double delta, double step) {
  Eigen::Matrix<double, 2, 8> dm;
  for (std::size_t i = 0; i < ModelParams::size; ++i) {
    const double h = step * (1.0 + std::abs(theta[i]));
    Theta up = theta;
    Theta down = theta;
    up[i] += h;
    down[i] -= h;
    const Regression rp = regression_coefficients(ModelParams::from_array(up), delta);
    const Regression rm = regression_coefficients(ModelParams::from_array(down), delta);
    const Vec2 d = ((rp.rho + rp.gamma * x) - (rm.rho + rm.gamma * x)) / (2.0 * h);
    dm(0, i) = d.v1();
    dm(1, i) = d.v2();
  }
  return dm;
}

Vector8 estimating_equation(const ObservationSeries& series, const WeightFn& g, const Theta& theta) {
  require_transitions(series);
  const ThetaPoint at(theta, series.delta);
  const PerturbedPoints pts(theta, series.delta);
  const auto& x = series.obs;
  CompensatedMatrix<8, 1> total;
  for (std::size_t k = 1; k <= series.n(); ++k) {
    const Vec2& prev = x[k - 1];
    const double gk = g(prev);
    const Vec2 resid = x[k] - at.mean(prev);
    const Weights w = estimating_weights(mean_jacobian_at(pts, prev), at.basis.at(prev));
    total.add(gk * summand(w, resid, outer(resid, resid), at.variance(prev)));
  }
  return total.value() / static_cast<double>(series.n());
}

SandwichCovariance sandwich_covariance(const ObservationSeries& series, const WeightFn& g, const Theta& theta) {
  require_transitions(series);
  const ThetaPoint at(theta, series.delta);
  const PerturbedPoints pts(theta, series.delta);
  const auto& x = series.obs;
  const std::size_t n = series.n();
  const double nd = static_cast<double>(n);

  CompensatedMatrix<8, 8> v_sum;
  CompensatedMatrix<8, 8> w_sum;
  for (std::size_t k = 1; k <= n; ++k) {
    const Vec2& prev = x[k - 1];
    const double gk = g(prev);
    const Vec2 resid = x[k] - at.mean(prev);
    const Eigen::Matrix<double, 2, 8> dm = mean_jacobian_at(pts, prev);
    const Eigen::Matrix<double, 4, 8> dv = variance_jacobian_at(pts, prev);
    const Weights w = estimating_weights(dm, at.basis.at(prev));
    v_sum.add(gk * (w.w0 * dm + w.w1 * dv));
    const Vector8 h = summand(w, resid, outer(resid, resid), at.variance(prev));
    w_sum.add((gk * gk) * (h * h.transpose()));
  }

  SandwichCovariance out;
  out.n = n;
  out.v_hat = -v_sum.value() / nd;
  out.w_hat = w_sum.value() / nd;
  out.w_hat = 0.5 * (out.w_hat + out.w_hat.transpose()).eval();

  const Eigen::JacobiSVD<Matrix8> svd(out.v_hat);
  const auto& sv = svd.singularValues();
  if (!(sv(7) > 1e-12 * sv(0))) {
    throw Error(ErrorKind::SingularV, "sandwich matrix V is numerically singular", sv(7));
  }
  const Matrix8 v_inv = out.v_hat.inverse();
  Matrix8 cov = v_inv * out.w_hat * v_inv.transpose() / nd;
  out.cov_hat = 0.5 * (cov + cov.transpose());
  return out;
}

Eigen::Matrix<double, 6, 6> regression_covariance(const SandwichCovariance& sandwich, const Theta& theta,
                                                  double delta) {
  Eigen::Matrix<double, 6, 8> jac;
  for (std::size_t i = 0; i < ModelParams::size; ++i) {
    const double h = fd_step(theta[i]);
    Theta up = theta;
    Theta down = theta;
    up[i] += h;
    down[i] -= h;
    const Regression rp = regression_coefficients(ModelParams::from_array(up), delta);
    const Regression rm = regression_coefficients(ModelParams::from_array(down), delta);
    const Eigen::Matrix<double, 6, 1> plus{rp.rho.v1(), rp.rho.v2(), rp.gamma.m11(), rp.gamma.m12(),
                                           rp.gamma.m21(), rp.gamma.m22()};
    const Eigen::Matrix<double, 6, 1> minus{rm.rho.v1(), rm.rho.v2(), rm.gamma.m11(), rm.gamma.m12(),
                                            rm.gamma.m21(), rm.gamma.m22()};
    jac.col(i) = (plus - minus) / (2.0 * h);
  }
  return jac * sandwich.cov_hat * jac.transpose();
}

std::vector<std::pair<std::string, double>> EstimateReport::fields() const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<std::string, double>> f;
  f.reserve(17 + 36);
  f.emplace_back("rho1", drift.rho_hat.v1());
  f.emplace_back("rho2", drift.rho_hat.v2());
  f.emplace_back("gamma11", drift.gamma_hat.m11());
  f.emplace_back("gamma12", drift.gamma_hat.m12());
  f.emplace_back("gamma21", drift.gamma_hat.m21());
  f.emplace_back("gamma22", drift.gamma_hat.m22());
  if (drift.admissible) {
    const ModelParams p = ModelParams::from_drift(*drift.a_hat, *drift.b_hat, 0.0, 0.0);
    f.emplace_back("a1", p.a1);
    f.emplace_back("a2", p.a2);
    f.emplace_back("b11", p.b11);
    f.emplace_back("b12", p.b12);
    f.emplace_back("b21", p.b21);
    f.emplace_back("b22", p.b22);
  } else {
    for (const char* name : {"a1", "a2", "b11", "b12", "b21", "b22"}) f.emplace_back(name, nan);
  }
  f.emplace_back("sigma1_sq", diffusion ? diffusion->sigma1_sq : nan);
  f.emplace_back("sigma2_sq", diffusion ? diffusion->sigma2_sq : nan);
  f.emplace_back("admissible", drift.admissible ? 1.0 : 0.0);
  f.emplace_back("n", static_cast<double>(drift.n));
  f.emplace_back("delta", drift.delta);
  for (int i = 0; i < 8; ++i) {
    for (int j = i; j < 8; ++j) {
      f.emplace_back("cov_" + std::to_string(i + 1) + std::to_string(j + 1),
                     sandwich ? sandwich->cov_hat(i, j) : nan);
    }
  }
  return f;
}

EstimateReport estimate_all(const ObservationSeries& series, const WeightFn& g, const EstimateOptions& options) {
  EstimateReport report{estimate_drift(series, g, options.rho_norm), std::nullopt, std::nullopt};
  if (!report.drift.admissible) return report;
  report.diffusion = estimate_diffusion(series, g, report.drift);
  if (options.covariance) {
    report.sandwich = sandwich_covariance(series, g, theta_hat(report.drift, *report.diffusion));
  }
  return report;
}

std::vector<std::string> report_field_names() {
  std::vector<std::string> names;
  for (auto& [name, value] : EstimateReport{}.fields()) names.push_back(name);
  return names;
}

std::string report_to_keyvalue(const EstimateReport& report) {
  std::string out;
  for (const auto& [name, value] : report.fields()) out += name + " = " + format_double(value) + "\n";
  return out;
}

std::string report_csv_header() {
  std::string out;
  for (const auto& name : report_field_names()) {
    if (!out.empty()) out += ',';
    out += name;
  }
  return out;
}

std::string report_csv_row(const EstimateReport& report) {
  std::string out;
  bool first = true;
  for (const auto& [name, value] : report.fields()) {
    if (!first) out += ',';
    first = false;
    out += format_double(value);
  }
  return out;
}

}  // namespace cbi2
