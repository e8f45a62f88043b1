#pragma once

// Weighted conditional least squares for the drift (rho, gamma) -> (A, B),
// the diffusion coefficients (sigma1^2, sigma2^2), and the plug-in sandwich
// covariance of the joint estimator.

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbi2/mat2.hpp"
#include "cbi2/model.hpp"
#include "cbi2/simulate.hpp"

namespace cbi2 {

enum class WeightKind { constant, inverse_norm, custom };

/// Positive weight g(X_{k-1}) attached to the k-th squared residual.
class WeightFn {
 public:
  /// g == 1: plain conditional least squares.
  static WeightFn constant();
  /// g(x) = 1 / (1 + |x|) with the Euclidean norm.
  static WeightFn inverse_norm();
  static WeightFn custom(std::function<double(const Vec2&)> rule, std::string name = "custom");

  /// Throws Config if the rule yields a non-positive or non-finite weight.
  double operator()(const Vec2& x) const;
  WeightKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }

 private:
  WeightFn(WeightKind kind, std::function<double(const Vec2&)> rule, std::string name);

  WeightKind kind_;
  std::function<double(const Vec2&)> rule_;
  std::string name_;
};

/// "constant" or "inverse_norm".
WeightFn parse_weight(const std::string& name);

/// How the intercept is normalized by the mean weight. `divide` is the
/// minimizer of the weighted sum of squares; `multiply` is the literal
/// printed form, kept for comparison. They coincide when g == 1.
enum class RhoNormalization { divide, multiply };

const char* to_string(RhoNormalization r) noexcept;
RhoNormalization parse_rho_normalization(const std::string& text);

/// Weighted sample moments of the one-step regression, each a 1/n average
/// over k = 1..n with g_k = g(X_{k-1}).
struct DriftStatistics {
  std::size_t n = 0;
  double g_bar = 0.0;
  Vec2 x_bar;    // mean of g_k X_k
  Vec2 x_tilde;  // mean of g_k X_{k-1}
  Mat2 t1_bar;   // mean of (g_k X_k - x_bar)(g_k X_{k-1} - x_tilde)^T
  Mat2 t1_tilde; // mean of (g_k - g_bar)(g_k X_k X_{k-1}^T - mean of g X_k X_{k-1}^T)
  Mat2 t2_bar;   // mean of (g_k X_{k-1} - x_tilde)(g_k X_{k-1} - x_tilde)^T
  Mat2 t2_tilde; // mean of (g_k - g_bar)(g_k X_{k-1} X_{k-1}^T - mean of g X_{k-1} X_{k-1}^T)
};

/// Requires n >= 2 transitions (InsufficientData otherwise).
DriftStatistics drift_statistics(const ObservationSeries& series, const WeightFn& g);

struct DriftEstimate {
  Vec2 rho_hat;
  Mat2 gamma_hat;
  /// Present only when gamma_hat is admissible.
  std::optional<Vec2> a_hat;
  std::optional<Mat2> b_hat;
  bool admissible = false;
  std::size_t n = 0;
  double delta = 1.0;

  /// Throws NonAdmissibleGamma (value = spectral radius of gamma_hat).
  void require_admissible() const;
  /// (A_hat, B_hat) as model parameters with the given diffusion values.
  ModelParams as_params(double sigma1, double sigma2) const;
};

/// gamma is admissible when every eigenvalue has positive real part and
/// modulus below one, so that B = -log(gamma)/delta exists with eigenvalues
/// of positive real part.
bool gamma_admissible(const Mat2& gamma);

/// gamma_hat = (T1_bar - T1_tilde)(T2_bar - T2_tilde)^{-1}, rho_hat from the
/// weighted means, then B_hat = -logm(gamma_hat)/delta and
/// A_hat = B_hat (I - gamma_hat)^{-1} rho_hat when admissible. Needs n >= 3
/// transitions; throws SingularDesign on degenerate data.
DriftEstimate estimate_drift(const ObservationSeries& series, const WeightFn& g,
                             RhoNormalization rho_norm = RhoNormalization::divide);

struct DiffusionEstimate {
  double sigma1_sq = 0.0;  // clamped at 0
  double sigma2_sq = 0.0;
  double sigma1_sq_raw = 0.0;
  double sigma2_sq_raw = 0.0;
  /// Determinant of the 2x2 normal-equation matrix.
  double conditioning = 0.0;
};

/// Supplies eta1, eta2 at a conditioning state.
using EtaProvider = std::function<EtaPair(const Vec2&)>;

/// Minimizes sum_k g_k |Vec(Z_k - s1 eta1(X_{k-1}) - s2 eta2(X_{k-1}))|^2 with
/// Z_k the outer product of the one-step residual, eta evaluated under
/// (A_hat, B_hat). Throws IllConditioned when the normal-equation
/// determinant is below 1e-12 times the product of its diagonal.
DiffusionEstimate estimate_diffusion(const ObservationSeries& series, const WeightFn& g, const DriftEstimate& drift);

/// Same minimization with a caller-supplied eta.
DiffusionEstimate estimate_diffusion(const ObservationSeries& series, const WeightFn& g, const DriftEstimate& drift,
                                     const EtaProvider& eta);

/// The normal-equation solve on its own: minimizes
/// sum_k g_k |Vec(Z_k - s1 eta1_k - s2 eta2_k)|^2 over (s1, s2).
DiffusionEstimate diffusion_normal_equations(const std::vector<Mat2>& z, const std::vector<EtaPair>& eta,
                                             const std::vector<double>& g);

/// Closed-form ratio estimator (phi_11 - phi_12)/psi, (phi_21 - phi_22)/psi
/// for a single state-independent pair (eta1, eta2). Returns raw values.
std::pair<double, double> diffusion_fixed_eta(const ObservationSeries& series, const WeightFn& g,
                                              const DriftEstimate& drift, const EtaPair& eta);

using Theta = std::array<double, ModelParams::size>;
using Matrix8 = Eigen::Matrix<double, 8, 8>;
using Vector8 = Eigen::Matrix<double, 8, 1>;

/// (a1, a2, b11, b12, b21, b22, sigma1, sigma2) from admissible estimates,
/// with sigma_i = sqrt of the clamped sigma_i^2.
Theta theta_hat(const DriftEstimate& drift, const DiffusionEstimate& diffusion);

struct SandwichCovariance {
  Matrix8 v_hat;
  Matrix8 w_hat;
  /// V^{-1} W V^{-T} / n: covariance of theta_hat itself.
  Matrix8 cov_hat;
  std::size_t n = 0;
};

/// Relative central-difference step used for theta derivatives.
inline constexpr double kDerivativeStep = 1e-5;

/// G_n(theta) / n for the joint estimating equation
///   G_n = sum_k g_k [w0(X_{k-1})(X_k - m(X_{k-1})) + w1(X_{k-1}) Vec(Z_k - v(X_{k-1}))],
/// whose root is theta_hat.
Vector8 estimating_equation(const ObservationSeries& series, const WeightFn& g, const Theta& theta);

/// Empirical V and outer-product W at theta_hat, all theta-derivatives by
/// central differences with step kDerivativeStep * (1 + |theta_i|).
/// Throws SingularV (value = smallest singular value).
SandwichCovariance sandwich_covariance(const ObservationSeries& series, const WeightFn& g, const Theta& theta);

/// d m(x; theta) / d theta as 2x8, central differences with relative step
/// `step`.
Eigen::Matrix<double, 2, 8> mean_jacobian(const Theta& theta, const Vec2& x, double delta,
                                          double step = kDerivativeStep);

/// Delta-method covariance of (rho1, rho2, gamma11, gamma12, gamma21, gamma22).
Eigen::Matrix<double, 6, 6> regression_covariance(const SandwichCovariance& sandwich, const Theta& theta,
                                                  double delta);

struct EstimateOptions {
  RhoNormalization rho_norm = RhoNormalization::divide;
  bool covariance = true;
};

struct EstimateReport {
  DriftEstimate drift;
  std::optional<DiffusionEstimate> diffusion;
  std::optional<SandwichCovariance> sandwich;

  /// Fixed-order (name, value) pairs: rho1, rho2, gamma11, gamma12, gamma21,
  /// gamma22, a1, a2, b11, b12, b21, b22, sigma1_sq, sigma2_sq, admissible,
  /// n, delta, then cov_ij for 1 <= i <= j <= 8. Missing values are NaN.
  std::vector<std::pair<std::string, double>> fields() const;
};

/// Runs drift, then diffusion and covariance when the drift is admissible.
/// Never throws NonAdmissibleGamma; callers inspect drift.admissible.
EstimateReport estimate_all(const ObservationSeries& series, const WeightFn& g, const EstimateOptions& options = {});

std::vector<std::string> report_field_names();
/// One "name = value" line per field.
std::string report_to_keyvalue(const EstimateReport& report);
std::string report_csv_header();
std::string report_csv_row(const EstimateReport& report);

}  // namespace cbi2
