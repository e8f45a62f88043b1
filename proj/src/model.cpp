#include "cbi2/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cbi2/error.hpp"

namespace cbi2 {

namespace {

constexpr double kNegativityTolerance = 1e-12;

int even_steps(double span, double max_step) {
  int n = static_cast<int>(std::ceil(span / max_step - 1e-9));
  n = std::max(n, 2);
  if (n % 2 != 0) ++n;
  return n;
}

double simpson_weight(int j, int n, double h) {
  if (j == 0 || j == n) return h / 3.0;
  return (j % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
}

void require_nonnegative(const Vec2& v, const char* what) {
  if (v.v1() < 0.0 || v.v2() < 0.0) {
    throw Error(ErrorKind::Config, std::string(what) + " must be componentwise nonnegative",
                std::min(v.v1(), v.v2()));
  }
}

Vec2 riccati_rhs(const ModelParams& params, const Vec2& v) { return -phi(params, v); }

double clamp_component(double c) {
  if (c >= 0.0) return c;
  if (c < -kNegativityTolerance) {
    throw Error(ErrorKind::StepTooLarge, "Riccati solution left the nonnegative cone; reduce dt", c);
  }
  return 0.0;
}

}  // namespace

std::array<double, ModelParams::size> ModelParams::to_array() const noexcept {
  return {a1, a2, b11, b12, b21, b22, sigma1, sigma2};
}

ModelParams ModelParams::from_array(const std::array<double, size>& t) noexcept {
  return {t[0], t[1], t[2], t[3], t[4], t[5], t[6], t[7]};
}

ModelParams ModelParams::from_drift(const Vec2& a, const Mat2& b, double sigma1, double sigma2) noexcept {
  return {a.v1(), a.v2(), b.m11(), -b.m12(), -b.m21(), b.m22(), sigma1, sigma2};
}

void ModelParams::validate(Validation mode) const {
  const auto theta = to_array();
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::isfinite(theta[i])) {
      throw Error(ErrorKind::Config, "parameter " + std::string(names[i]) + " is not finite", theta[i]);
    }
  }
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(ErrorKind::Config, std::string(name) + " must be > 0", v);
  };
  auto nonnegative = [](double v, const char* name) {
    if (!(v >= 0.0)) throw Error(ErrorKind::Config, std::string(name) + " must be >= 0", v);
  };
  positive(a1, "a1");
  positive(a2, "a2");
  positive(b11, "b11");
  positive(b22, "b22");
  nonnegative(b12, "b12");
  nonnegative(b21, "b21");
  if (mode == Validation::strict) {
    positive(sigma1, "sigma1");
    positive(sigma2, "sigma2");
  } else {
    nonnegative(sigma1, "sigma1");
    nonnegative(sigma2, "sigma2");
  }
}

double ModelParams::xi_min() const {
  const auto [e1, e2] = eigenvalues(drift_matrix());
  return std::min(e1.real(), e2.real());
}

bool operator==(const ModelParams& a, const ModelParams& b) noexcept { return a.to_array() == b.to_array(); }

Vec2 phi(const ModelParams& p, const Vec2& l) {
  // Drift -BX acts on the Laplace exponent through B^T: X1 feeds X2 at rate
  // b21, so b21 multiplies lambda2 in the first component.
  return {p.b11 * l.v1() - p.b21 * l.v2() + 0.5 * p.sigma1 * p.sigma1 * l.v1() * l.v1(),
          -p.b12 * l.v1() + p.b22 * l.v2() + 0.5 * p.sigma2 * p.sigma2 * l.v2() * l.v2()};
}

RiccatiSolution solve_riccati(const ModelParams& params, const Vec2& lambda, double t_max, double dt) {
  require_nonnegative(lambda, "lambda");
  if (!(dt > 0.0)) throw Error(ErrorKind::Config, "dt must be > 0", dt);
  if (!(t_max >= dt)) throw Error(ErrorKind::Config, "t_max must be >= dt", t_max);

  const int n = even_steps(t_max, dt);
  const double h = t_max / n;
  RiccatiSolution sol{lambda, {}, {}};
  sol.times.reserve(n + 1);
  sol.values.reserve(n + 1);
  sol.times.push_back(0.0);
  sol.values.push_back(lambda);

  Vec2 v = lambda;
  for (int j = 1; j <= n; ++j) {
    const Vec2 k1 = riccati_rhs(params, v);
    const Vec2 k2 = riccati_rhs(params, v + (0.5 * h) * k1);
    const Vec2 k3 = riccati_rhs(params, v + (0.5 * h) * k2);
    const Vec2 k4 = riccati_rhs(params, v + h * k3);
    const Vec2 next = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    v = Vec2(clamp_component(next.v1()), clamp_component(next.v2()));
    sol.times.push_back(j * h);
    sol.values.push_back(v);
  }
  return sol;
}

double riccati_halving_change(const ModelParams& params, const Vec2& lambda, double t_max, double dt) {
  const Vec2 coarse = solve_riccati(params, lambda, t_max, dt).final_value();
  const Vec2 fine = solve_riccati(params, lambda, t_max, 0.5 * dt).final_value();
  const double scale = max_abs(fine);
  const double diff = max_abs(coarse - fine);
  if (scale == 0.0) return diff;
  return diff / scale;
}

double integrated_immigration(const ModelParams& params, const RiccatiSolution& sol) {
  const Vec2 a = params.immigration();
  const int n = static_cast<int>(sol.values.size()) - 1;
  if (n < 2 || n % 2 != 0) throw Error(ErrorKind::Config, "Simpson rule needs an even number of panels", n);
  const double h = sol.times.back() / n;
  double total = 0.0;
  for (int j = 0; j <= n; ++j) total += simpson_weight(j, n, h) * dot(a, sol.values[j]);
  return total;
}

double transition_laplace(const ModelParams& params, const Vec2& x, const Vec2& lambda, double t, double dt) {
  require_nonnegative(x, "x");
  require_nonnegative(lambda, "lambda");
  if (t < 0.0) throw Error(ErrorKind::Config, "t must be >= 0", t);
  if (t == 0.0) return std::exp(-dot(x, lambda));
  const RiccatiSolution sol = solve_riccati(params, lambda, t, std::min(dt, t));
  return std::exp(-dot(x, sol.final_value()) - integrated_immigration(params, sol));
}

double stationary_horizon(const ModelParams& params, const Vec2& lambda, double tail_tol) {
  if (max_abs(lambda) == 0.0) return 0.0;
  const Mat2 bt = params.drift_matrix().transpose();
  const Mat2 bt_inv = inverse(bt);
  const Vec2 a = params.immigration();
  // int_T^inf <A, e^{-B^T s} lambda> ds = <A, (B^T)^{-1} e^{-B^T T} lambda>
  // dominates the tail of int <A, v_s> ds.
  double horizon = 10.0 / params.xi_min();
  for (int iter = 0; iter < 400; ++iter) {
    const double tail = std::abs(dot(a, bt_inv * (expm(-horizon * bt) * lambda)));
    if (tail < tail_tol) return horizon;
    horizon *= 1.25;
  }
  throw Error(ErrorKind::NonErgodic, "stationary integral tail does not decay", horizon);
}

double stationary_laplace(const ModelParams& params, const Vec2& lambda, double dt) {
  require_nonnegative(lambda, "lambda");
  if (!params.is_ergodic() || !(params.xi_min() > 0.0)) {
    throw Error(ErrorKind::NonErgodic, "stationary law requires kappa < 1", params.kappa());
  }
  if (max_abs(lambda) == 0.0) return 1.0;
  if (!(dt > 0.0)) {
    const double nonlinear = std::max(params.sigma1 * params.sigma1 * lambda.v1(),
                                      params.sigma2 * params.sigma2 * lambda.v2());
    const double scale = std::max({1.0, spectral_radius(params.drift_matrix()), nonlinear});
    dt = 0.0025 / scale;
  }
  const double horizon = std::max(stationary_horizon(params, lambda), 2.0 * dt);
  const RiccatiSolution sol = solve_riccati(params, lambda, horizon, dt);
  return std::exp(-integrated_immigration(params, sol));
}

Vec2 conditional_mean(const ModelParams& params, const Vec2& x, double t) {
  const Mat2 b = params.drift_matrix();
  const Mat2 decay = expm(-t * b);
  return decay * x + inverse(b) * ((Mat2::identity() - decay) * params.immigration());
}

Regression regression_coefficients(const ModelParams& params, double delta) {
  const Mat2 b = params.drift_matrix();
  const Mat2 gamma = expm(-delta * b);
  const Vec2 rho = inverse(b) * ((Mat2::identity() - gamma) * params.immigration());
  return {rho, gamma};
}

int default_eta_panels(const ModelParams& params, double delta) {
  // Keep h * (decay rate of the integrand) <= 0.01.
  const double rate = 3.0 * spectral_radius(params.drift_matrix()) * delta;
  return even_steps(std::max(rate / 0.01, 200.0), 1.0);
}

EtaPair eta_matrices(const ModelParams& params, const Vec2& x, double delta, int panels) {
  if (!(delta > 0.0)) throw Error(ErrorKind::Config, "delta must be > 0", delta);
  const int n = panels > 0 ? even_steps(panels, 1.0) : default_eta_panels(params, delta);
  const double h = delta / n;
  const Mat2 b = params.drift_matrix();
  Mat2 eta1;
  Mat2 eta2;
  for (int j = 0; j <= n; ++j) {
    const double s = j * h;
    const double w = simpson_weight(j, n, h);
    const Mat2 e = expm(-(delta - s) * b);
    const Vec2 f = conditional_mean(params, x, s);
    const Vec2 c1 = e.column(0);
    const Vec2 c2 = e.column(1);
    eta1 = eta1 + (w * f.v1()) * outer(c1, c1);
    eta2 = eta2 + (w * f.v2()) * outer(c2, c2);
  }
  return {eta1, eta2};
}

EtaBasis::EtaBasis(const ModelParams& params, double delta, int panels) {
  if (!(delta > 0.0)) throw Error(ErrorKind::Config, "delta must be > 0", delta);
  const int n = panels > 0 ? even_steps(panels, 1.0) : default_eta_panels(params, delta);
  const double h = delta / n;
  const Mat2 b = params.drift_matrix();
  const Mat2 b_inv = inverse(b);
  const Vec2 a = params.immigration();
  for (int j = 0; j <= n; ++j) {
    const double s = j * h;
    const double w = simpson_weight(j, n, h);
    const Mat2 e = expm(-(delta - s) * b);
    const Mat2 p = expm(-s * b);
    // f(s; x) = p x + g(s)
    const Vec2 g = b_inv * ((Mat2::identity() - p) * a);
    const Mat2 c1 = outer(e.column(0), e.column(0));
    const Mat2 c2 = outer(e.column(1), e.column(1));
    parts_[0][0] = parts_[0][0] + (w * g.v1()) * c1;
    parts_[0][1] = parts_[0][1] + (w * p.m11()) * c1;
    parts_[0][2] = parts_[0][2] + (w * p.m12()) * c1;
    parts_[1][0] = parts_[1][0] + (w * g.v2()) * c2;
    parts_[1][1] = parts_[1][1] + (w * p.m21()) * c2;
    parts_[1][2] = parts_[1][2] + (w * p.m22()) * c2;
  }
}

EtaPair EtaBasis::at(const Vec2& x) const {
  auto eval = [&](const std::array<Mat2, 3>& m) { return m[0] + x.v1() * m[1] + x.v2() * m[2]; };
  return {eval(parts_[0]), eval(parts_[1])};
}

Mat2 EtaBasis::variance(const Vec2& x, double sigma1_sq, double sigma2_sq) const {
  const EtaPair eta = at(x);
  return sigma1_sq * eta.eta1 + sigma2_sq * eta.eta2;
}

Mat2 conditional_variance(const ModelParams& params, const Vec2& x, double delta) {
  const EtaPair eta = eta_matrices(params, x, delta);
  return (params.sigma1 * params.sigma1) * eta.eta1 + (params.sigma2 * params.sigma2) * eta.eta2;
}

}  // namespace cbi2
