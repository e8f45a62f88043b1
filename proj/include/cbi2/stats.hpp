#pragma once

// Small sample statistics for the Monte Carlo harnesses.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace cbi2 {

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double mean(const std::vector<double>& xs);
/// Unbiased (n - 1) sample variance; NaN for fewer than two values.
double sample_variance(const std::vector<double>& xs);
double median(std::vector<double> xs);
/// sqrt(mean(x^2)).
double root_mean_square(const std::vector<double>& xs);

/// Standard normal quantile.
double normal_quantile(double p);
double normal_cdf(double x);

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample KS test of `xs` against N(0, 1), with Stephens' small-sample
/// correction (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
KsResult ks_test_normal(std::vector<double> xs);

/// KS test of (x - mean) / sd against N(0, 1) using the sample's own mean
/// and standard deviation.
KsResult ks_test_studentized(const std::vector<double>& xs);

/// QQ coordinates (normal quantile at (i - 0.5)/n, i-th order statistic).
std::vector<std::pair<double, double>> qq_normal(std::vector<double> xs);

}  // namespace cbi2
