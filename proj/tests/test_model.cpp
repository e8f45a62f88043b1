#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cbi2/error.hpp"
#include "cbi2/model.hpp"

using namespace cbi2;

namespace {

// A = (1, 1), B = [[1, -0.2], [-0.3, 1]].
ModelParams coupled(double s1 = 0.5, double s2 = 0.5) { return {1.0, 1.0, 1.0, 0.2, 0.3, 1.0, s1, s2}; }

ModelParams diagonal(double a = 1.0, double b = 1.0, double s = 1.0) { return {a, a, b, 0.0, 0.0, b, s, s}; }

// Scalar CIR: E_x exp(-l X_t) for dX = (a - bX)dt + s sqrt(X) dW.
double cir_laplace(double a, double b, double s, double x, double l, double t) {
  const double d = 1.0 + l * s * s * (1.0 - std::exp(-b * t)) / (2.0 * b);
  return std::pow(d, -2.0 * a / (s * s)) * std::exp(-l * x * std::exp(-b * t) / d);
}

double cir_mean(double a, double b, double x, double t) {
  return x * std::exp(-b * t) + a / b * (1.0 - std::exp(-b * t));
}

double cir_variance(double a, double b, double s, double x, double t) {
  const double e = std::exp(-b * t);
  return x * s * s * (e - e * e) / b + a * s * s * (1.0 - e) * (1.0 - e) / (2.0 * b * b);
}

}  // namespace

TEST(Params, ValidationAndKappa) {
  EXPECT_NO_THROW(coupled().validate());
  EXPECT_NEAR(coupled().kappa(), 0.06, 1e-15);
  EXPECT_TRUE(coupled().is_ergodic());
  ModelParams bad = coupled();
  bad.b12 = -0.1;
  EXPECT_THROW(bad.validate(), Error);
  bad = coupled();
  bad.sigma1 = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_NO_THROW(bad.validate(Validation::relaxed));
  ModelParams critical{1.0, 1.0, 1.0, 1.5, 1.5, 1.0, 1.0, 1.0};
  EXPECT_NO_THROW(critical.validate());
  EXPECT_FALSE(critical.is_ergodic());
}

TEST(Params, ArrayAndDriftRoundTrip) {
  const ModelParams p = coupled(0.5, 0.7);
  EXPECT_EQ(ModelParams::from_array(p.to_array()), p);
  EXPECT_EQ(ModelParams::from_drift(p.immigration(), p.drift_matrix(), 0.5, 0.7), p);
  EXPECT_EQ(p.drift_matrix(), Mat2(1.0, -0.2, -0.3, 1.0));
  EXPECT_NEAR(p.xi_min(), 1.0 - std::sqrt(0.06), 1e-15);
}

TEST(Phi, ZeroLambda) { EXPECT_EQ(phi(coupled(), Vec2(0.0, 0.0)), Vec2(0.0, 0.0)); }

TEST(Phi, DiagonalModel) { EXPECT_EQ(phi(diagonal(), Vec2(1.0, 1.0)), Vec2(1.5, 1.5)); }

TEST(Phi, UnitVectorGenericParams) {
  const ModelParams p{0.7, 1.3, 1.1, 0.25, 0.4, 0.9, 0.6, 0.8};
  const Vec2 v = phi(p, Vec2(1.0, 0.0));
  EXPECT_DOUBLE_EQ(v.v1(), p.b11 + 0.5 * p.sigma1 * p.sigma1);
  // Transposed coupling: X1 drives X2 at rate b21, so lambda1 feeds back
  // through b12 here.
  EXPECT_DOUBLE_EQ(v.v2(), -p.b12);
}

TEST(Riccati, ZeroIsFixedPoint) {
  const RiccatiSolution sol = solve_riccati(coupled(), Vec2(0.0, 0.0), 3.0, 0.01);
  for (const Vec2& v : sol.values) EXPECT_EQ(v, Vec2(0.0, 0.0));
  EXPECT_NEAR(sol.times.back(), 3.0, 1e-12);
}

TEST(Riccati, Preconditions) {
  EXPECT_THROW(solve_riccati(coupled(), Vec2(-1.0, 0.0), 1.0, 0.01), Error);
  EXPECT_THROW(solve_riccati(coupled(), Vec2(1.0, 0.0), 1.0, 0.0), Error);
  EXPECT_THROW(solve_riccati(coupled(), Vec2(1.0, 0.0), 0.001, 0.01), Error);
}

TEST(Riccati, StepTooLarge) {
  try {
    solve_riccati(coupled(3.0, 3.0), Vec2(50.0, 50.0), 2.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StepTooLarge);
    EXPECT_LT(e.value(), 0.0);
  }
}

TEST(Riccati, ZeroDiffusionIsLinearFlow) {
  const ModelParams p = coupled(0.0, 0.0);
  const Vec2 lambda(0.8, 1.7);
  const RiccatiSolution sol = solve_riccati(p, lambda, 4.0, 0.005);
  const Mat2 bt = p.drift_matrix().transpose();
  for (std::size_t j = 0; j < sol.values.size(); j += 40) {
    const Vec2 u = expm(-sol.times[j] * bt) * lambda;
    EXPECT_LE(max_abs(sol.values[j] - u), 1e-10) << "t = " << sol.times[j];
  }
}

TEST(Riccati, DominatedByLinearFlow) {
  const ModelParams p = coupled(0.9, 1.3);
  const Mat2 bt = p.drift_matrix().transpose();
  for (const Vec2& lambda : {Vec2(0.5, 0.0), Vec2(0.0, 2.0), Vec2(3.0, 1.0)}) {
    const RiccatiSolution sol = solve_riccati(p, lambda, 10.0, 0.005);
    for (std::size_t j = 0; j < sol.values.size(); ++j) {
      const Vec2 u = expm(-sol.times[j] * bt) * lambda;
      EXPECT_LE(sol.values[j].v1(), u.v1() + 1e-8);
      EXPECT_LE(sol.values[j].v2(), u.v2() + 1e-8);
      EXPECT_GE(sol.values[j].v1(), 0.0);
      EXPECT_GE(sol.values[j].v2(), 0.0);
    }
  }
}

TEST(Riccati, HalvingCheckAtDefaultStep) {
  // Default step for unit spacing is delta / 200.
  for (const Vec2& lambda : {Vec2(0.5, 0.0), Vec2(0.3, 0.7), Vec2(2.0, 2.0)}) {
    EXPECT_LT(riccati_halving_change(coupled(), lambda, 1.0, 1.0 / 200.0), 1e-8);
    EXPECT_LT(riccati_halving_change(coupled(), lambda, 10.0, 1.0 / 200.0), 1e-8);
  }
}

TEST(Riccati, DecayRateMatchesSmallestEigenvalue) {
  const ModelParams p = coupled();
  const double xi = p.xi_min();
  for (const Vec2& lambda : {Vec2(1.0, 1.0), Vec2(0.5, 0.0), Vec2(0.0, 3.0)}) {
    const RiccatiSolution sol = solve_riccati(p, lambda, 10.0 / xi, 0.005);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t j = 0; j < sol.values.size(); ++j) {
      const double t = sol.times[j];
      if (t < 5.0 / xi || t > 10.0 / xi) continue;
      const double y = std::log(norm(sol.values[j]));
      sx += t;
      sy += y;
      sxx += t * t;
      sxy += t * y;
      ++m;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    EXPECT_NEAR(-slope / xi, 1.0, 0.05);
  }
}

TEST(TransitionLaplace, TrivialCases) {
  EXPECT_EQ(transition_laplace(coupled(), Vec2(2.0, 3.0), Vec2(0.0, 0.0), 1.5, 0.005), 1.0);
  EXPECT_DOUBLE_EQ(transition_laplace(coupled(), Vec2(2.0, 3.0), Vec2(0.4, 0.1), 0.0, 0.005), std::exp(-1.1));
}

TEST(TransitionLaplace, DiagonalFactorizesIntoScalarCir) {
  const ModelParams p{0.8, 1.5, 1.2, 0.0, 0.0, 0.7, 0.9, 0.6};
  const Vec2 x(0.4, 2.0);
  for (double t : {0.3, 1.0, 4.0}) {
    for (const Vec2& l : {Vec2(0.5, 0.0), Vec2(0.3, 1.7), Vec2(2.0, 0.2)}) {
      const double oracle = cir_laplace(p.a1, p.b11, p.sigma1, x.v1(), l.v1(), t) *
                            cir_laplace(p.a2, p.b22, p.sigma2, x.v2(), l.v2(), t);
      EXPECT_NEAR(transition_laplace(p, x, l, t, 0.005), oracle, 1e-6);
    }
  }
}

TEST(TransitionLaplace, FlowProperty) {
  const ModelParams p = coupled(0.8, 0.6);
  const Vec2 lambda(0.7, 1.2);
  const double s = 0.8, t = 1.3;
  const Vec2 vt = solve_riccati(p, lambda, t, 0.001).final_value();
  const Vec2 vs_of_vt = solve_riccati(p, vt, s, 0.001).final_value();
  const Vec2 v_sum = solve_riccati(p, lambda, s + t, 0.001).final_value();
  EXPECT_LE(max_abs(vs_of_vt - v_sum), 1e-7);
}

TEST(StationaryLaplace, TrivialAndMonotone) {
  const ModelParams p = coupled();
  EXPECT_EQ(stationary_laplace(p, Vec2(0.0, 0.0)), 1.0);
  double prev = 1.0;
  for (double l = 0.1; l < 3.0; l += 0.3) {
    const double v = stationary_laplace(p, Vec2(l, 0.5));
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    prev = v;
  }
  prev = 1.0;
  for (double l = 0.1; l < 3.0; l += 0.3) {
    const double v = stationary_laplace(p, Vec2(0.5, l));
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(StationaryLaplace, DiagonalGammaLaw) {
  for (const auto& [a, b, s] : {std::tuple{1.0, 1.0, 1.0}, std::tuple{0.7, 1.4, 0.8}}) {
    const ModelParams p = diagonal(a, b, s);
    for (const Vec2& l : {Vec2(0.5, 0.5), Vec2(1.0, 0.2), Vec2(3.0, 0.0)}) {
      const double k = 2.0 * a / (s * s);
      const double oracle =
          std::pow(1.0 + l.v1() * s * s / (2.0 * b), -k) * std::pow(1.0 + l.v2() * s * s / (2.0 * b), -k);
      EXPECT_NEAR(stationary_laplace(p, l), oracle, 1e-8);
    }
  }
  // a = b = sigma = 1, lambda = (1, 1): (1 + 1/2)^{-4}.
  EXPECT_NEAR(stationary_laplace(diagonal(), Vec2(1.0, 1.0)), std::pow(1.5, -4.0), 1e-8);
}

TEST(StationaryLaplace, NonErgodic) {
  const ModelParams p{1.0, 1.0, 1.0, 1.5, 1.5, 1.0, 1.0, 1.0};
  try {
    stationary_laplace(p, Vec2(1.0, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonErgodic);
    EXPECT_NEAR(e.value(), 2.25, 1e-15);
  }
}

TEST(StationaryLaplace, LimitOfTransition) {
  const ModelParams p = coupled(0.7, 0.9);
  const double t = 40.0 / p.xi_min();
  for (const Vec2& x : {Vec2(0.0, 0.0), Vec2(3.0, 1.0)}) {
    for (const Vec2& l : {Vec2(0.5, 0.0), Vec2(0.3, 0.7)}) {
      EXPECT_NEAR(transition_laplace(p, x, l, t, 0.005), stationary_laplace(p, l), 1e-6);
    }
  }
}

TEST(ConditionalMean, Examples) {
  const ModelParams p = coupled();
  const Vec2 x(0.3, 2.2);
  EXPECT_EQ(conditional_mean(p, x, 0.0), x);
  const Vec2 limit = conditional_mean(p, x, 200.0);
  EXPECT_NEAR(limit.v1(), 1.2 / 0.94, 1e-12);
  EXPECT_NEAR(limit.v2(), 1.3 / 0.94, 1e-12);
  EXPECT_NEAR(limit.v1(), 1.27660, 5e-6);
  EXPECT_NEAR(limit.v2(), 1.38298, 5e-6);
}

TEST(ConditionalMean, LongRunMatchesTriangularCase) {
  // b12 = 0: long-run X2 mean is a2/b22 + (b21/b22)(a1/b11).
  const ModelParams p{0.6, 0.9, 1.3, 0.0, 0.4, 0.8, 0.5, 0.5};
  const Vec2 limit = conditional_mean(p, Vec2(1.0, 1.0), 200.0);
  EXPECT_NEAR(limit.v1(), p.a1 / p.b11, 1e-12);
  EXPECT_NEAR(limit.v2(), p.a2 / p.b22 + p.b21 / p.b22 * (p.a1 / p.b11), 1e-12);
}

TEST(ConditionalMean, DiagonalScalarCir) {
  const ModelParams p{0.8, 1.5, 1.2, 0.0, 0.0, 0.7, 0.9, 0.6};
  const Vec2 x(0.4, 2.0);
  for (double t : {0.1, 1.0, 5.0}) {
    const Vec2 m = conditional_mean(p, x, t);
    EXPECT_NEAR(m.v1(), cir_mean(p.a1, p.b11, x.v1(), t), 1e-14);
    EXPECT_NEAR(m.v2(), cir_mean(p.a2, p.b22, x.v2(), t), 1e-14);
  }
}

TEST(ConditionalMean, RegressionIdentity) {
  const ModelParams p = coupled();
  for (double delta : {0.5, 1.0, 2.0}) {
    const Regression r = regression_coefficients(p, delta);
    for (const Vec2& x : {Vec2(0.0, 0.0), Vec2(1.5, 0.2), Vec2(4.0, 3.0)}) {
      EXPECT_LE(max_abs(conditional_mean(p, x, delta) - (r.rho + r.gamma * x)), 1e-14);
    }
  }
}

TEST(Eta, PositiveTraceAndSymmetricPsd) {
  const ModelParams p = coupled(0.5, 0.7);
  for (const Vec2& x : {Vec2(0.0, 0.0), Vec2(1.0, 0.0), Vec2(0.2, 5.0)}) {
    const EtaPair e = eta_matrices(p, x, 1.0);
    EXPECT_GT((e.eta1 + e.eta2).trace(), 0.0);
    for (const Mat2& m : {e.eta1, e.eta2}) {
      EXPECT_NEAR(m.m12(), m.m21(), 1e-15);
      EXPECT_GE(m.m11(), 0.0);
      EXPECT_GE(m.m22(), 0.0);
      EXPECT_GE(m.det(), -1e-15);
    }
  }
}

TEST(Eta, DiagonalMatchesScalarCirVariance) {
  const double a = 0.8, b = 1.2, delta = 1.5;
  const ModelParams p{a, a, b, 0.0, 0.0, b, 1.0, 1.0};
  const Vec2 x(0.4, 2.0);
  const EtaPair e = eta_matrices(p, x, delta);
  EXPECT_EQ(e.eta1.m22(), 0.0);
  EXPECT_EQ(e.eta1.m12(), 0.0);
  EXPECT_EQ(e.eta2.m11(), 0.0);
  EXPECT_NEAR(e.eta1.m11(), cir_variance(a, b, 1.0, x.v1(), delta), 1e-10);
  EXPECT_NEAR(e.eta2.m22(), cir_variance(a, b, 1.0, x.v2(), delta), 1e-10);
}

TEST(Eta, AffineInState) {
  const ModelParams p = coupled(0.5, 0.7);
  const Vec2 x(0.7, 1.9);
  const EtaPair e0 = eta_matrices(p, Vec2(0.0, 0.0), 1.0);
  const EtaPair e1 = eta_matrices(p, x, 1.0);
  const EtaPair e2 = eta_matrices(p, 2.0 * x, 1.0);
  EXPECT_LE(((e2.eta1 - e0.eta1) - 2.0 * (e1.eta1 - e0.eta1)).max_abs(), 1e-12);
  EXPECT_LE(((e2.eta2 - e0.eta2) - 2.0 * (e1.eta2 - e0.eta2)).max_abs(), 1e-12);
}

TEST(Eta, BasisMatchesDirectQuadrature) {
  const ModelParams p{0.6, 1.4, 1.3, 0.4, 0.2, 0.8, 0.5, 0.7};
  for (double delta : {0.25, 1.0, 3.0}) {
    const EtaBasis basis(p, delta);
    for (const Vec2& x : {Vec2(0.0, 0.0), Vec2(1.3, 0.4), Vec2(5.0, 7.0)}) {
      const EtaPair d = eta_matrices(p, x, delta);
      const EtaPair b = basis.at(x);
      EXPECT_LE((d.eta1 - b.eta1).max_abs(), 1e-13);
      EXPECT_LE((d.eta2 - b.eta2).max_abs(), 1e-13);
    }
  }
}

TEST(ConditionalVariance, UnitDiagonalValue) {
  const Mat2 v = conditional_variance(diagonal(), Vec2(1.0, 1.0), 1.0);
  const double expected = (std::exp(-1.0) - std::exp(-2.0)) + std::pow(1.0 - std::exp(-1.0), 2) / 2.0;
  EXPECT_NEAR(v.m11(), 0.432332, 1e-5);
  EXPECT_NEAR(v.m22(), 0.432332, 1e-5);
  EXPECT_NEAR(v.m11(), expected, 1e-10);
  EXPECT_EQ(v.m12(), 0.0);
  EXPECT_EQ(v.m21(), 0.0);
}

TEST(ConditionalVariance, ZeroDiffusionIsZero) {
  const ModelParams p = coupled(0.0, 0.0);
  ASSERT_NO_THROW(p.validate(Validation::relaxed));
  EXPECT_EQ(conditional_variance(p, Vec2(1.0, 2.0), 1.0), Mat2::zero());
}

TEST(ConditionalVariance, DiagonalScalarOracleRandom) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ux(0.0, 5.0), ud(0.05, 3.0);
  const ModelParams p{0.8, 1.5, 1.2, 0.0, 0.0, 0.7, 0.9, 0.6};
  for (int i = 0; i < 20; ++i) {
    const Vec2 x(ux(rng), ux(rng));
    const double d = ud(rng);
    const Mat2 v = conditional_variance(p, x, d);
    EXPECT_NEAR(v.m11(), cir_variance(p.a1, p.b11, p.sigma1, x.v1(), d), 1e-8);
    EXPECT_NEAR(v.m22(), cir_variance(p.a2, p.b22, p.sigma2, x.v2(), d), 1e-8);
    EXPECT_EQ(v.m12(), 0.0);
  }
}
