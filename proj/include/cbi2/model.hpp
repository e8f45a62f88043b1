#pragma once

// Analytic side of the two-type CBI diffusion
//
//   dX = (A - B X) dt + Sigma sqrt(X) dW,   B = [[b11, -b12], [-b21, b22]],
//
// parameter handling, branching mechanism and Riccati flow, transition and
// stationary Laplace transforms, and the exact conditional first and second
// moments used by the estimators.

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "cbi2/mat2.hpp"

namespace cbi2 {

enum class Validation {
  strict,
  // Admits sigma1 = sigma2 = 0 (deterministic flow), used to check ODE limits.
  relaxed,
};

struct ModelParams {
  double a1 = 1.0;
  double a2 = 1.0;
  double b11 = 1.0;
  double b12 = 0.0;
  double b21 = 0.0;
  double b22 = 1.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;

  static constexpr std::size_t size = 8;
  /// Parameter order used everywhere theta appears as a vector.
  static constexpr std::array<std::string_view, size> names{"a1", "a2", "b11", "b12", "b21", "b22", "sigma1", "sigma2"};

  std::array<double, size> to_array() const noexcept;
  static ModelParams from_array(const std::array<double, size>& theta) noexcept;
  /// Builds parameters from an immigration vector and a full drift matrix;
  /// b12 and b21 are read off the negated off-diagonal entries.
  static ModelParams from_drift(const Vec2& a, const Mat2& b, double sigma1, double sigma2) noexcept;

  /// Throws Config on a sign-constraint violation. kappa >= 1 is allowed
  /// here; operations that need stationarity check it themselves.
  void validate(Validation mode = Validation::strict) const;

  double kappa() const noexcept { return b12 * b21 / (b11 * b22); }
  bool is_ergodic() const noexcept { return kappa() < 1.0; }
  bool is_diagonal() const noexcept { return b12 == 0.0 && b21 == 0.0; }

  Vec2 immigration() const { return {a1, a2}; }
  Mat2 drift_matrix() const { return {b11, -b12, -b21, b22}; }
  /// Smallest real part among the eigenvalues of B; the Riccati decay rate.
  double xi_min() const;
};

bool operator==(const ModelParams& a, const ModelParams& b) noexcept;

/// Branching mechanism phi(lambda) = B^T lambda + (sigma_i^2 / 2) lambda_i^2.
Vec2 phi(const ModelParams& params, const Vec2& lambda);

struct RiccatiSolution {
  Vec2 lambda;
  std::vector<double> times;
  std::vector<Vec2> values;

  const Vec2& final_value() const { return values.back(); }
};

/// Classical RK4 for d/dt v = -phi(v), v(0) = lambda, on an even number of
/// equal steps no longer than `dt` covering [0, t_max].
RiccatiSolution solve_riccati(const ModelParams& params, const Vec2& lambda, double t_max, double dt);

/// Relative change of v(t_max) when the step is halved.
double riccati_halving_change(const ModelParams& params, const Vec2& lambda, double t_max, double dt);

/// Composite Simpson estimate of int_0^T <A, v_s> ds on the solution grid.
double integrated_immigration(const ModelParams& params, const RiccatiSolution& solution);

/// E_x[exp(-<lambda, X_t>)].
double transition_laplace(const ModelParams& params, const Vec2& x, const Vec2& lambda, double t, double dt);

/// Laplace transform of the stationary law. Throws NonErgodic if kappa >= 1.
/// A non-positive `dt` selects a step from the model's rates.
double stationary_laplace(const ModelParams& params, const Vec2& lambda, double dt = 0.0);

/// Time beyond which the stationary integral's tail is below `tail_tol`,
/// bounded through the linearized flow exp(-B^T t) lambda.
double stationary_horizon(const ModelParams& params, const Vec2& lambda, double tail_tol = 1e-10);

/// E[X_t | X_0 = x] = e^{-Bt} x + B^{-1}(I - e^{-Bt}) A.
Vec2 conditional_mean(const ModelParams& params, const Vec2& x, double t);

/// One-step regression X_k = rho + gamma X_{k-1} + eps_k over spacing delta.
struct Regression {
  Vec2 rho;
  Mat2 gamma;
};

/// gamma = e^{-B delta}, rho = B^{-1}(I - gamma) A.
Regression regression_coefficients(const ModelParams& params, double delta);

struct EtaPair {
  Mat2 eta1;
  Mat2 eta2;
};

/// Simpson panel count used for eta quadrature when none is given.
int default_eta_panels(const ModelParams& params, double delta);

/// Direct Simpson quadrature of
///   eta_i(x) = int_0^delta e^{-B(delta-s)} diag_i(f_i(s)) e^{-B^T(delta-s)} ds
/// with f(s) = conditional_mean(x, s).
EtaPair eta_matrices(const ModelParams& params, const Vec2& x, double delta, int panels = 0);

/// eta_i is affine in the conditioning state. EtaBasis precomputes the
/// intercept and the two slopes so evaluating at many states is O(1) each.
class EtaBasis {
 public:
  EtaBasis(const ModelParams& params, double delta, int panels = 0);

  EtaPair at(const Vec2& x) const;
  Mat2 variance(const Vec2& x, double sigma1_sq, double sigma2_sq) const;

 private:
  // [i][0] intercept, [i][1] slope in x1, [i][2] slope in x2 for eta_{i+1}.
  std::array<std::array<Mat2, 3>, 2> parts_;
};

/// Var[X_delta | X_0 = x] = sigma1^2 eta1(x) + sigma2^2 eta2(x).
Mat2 conditional_variance(const ModelParams& params, const Vec2& x, double delta);

}  // namespace cbi2
