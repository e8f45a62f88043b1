#include "cbi2/stats.hpp"

#include <algorithm>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "cbi2/error.hpp"

namespace cbi2 {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const boost::math::normal_distribution<double>& standard_normal() {
  static const boost::math::normal_distribution<double> dist(0.0, 1.0);
  return dist;
}

}  // namespace

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return kNaN;
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return kNaN;
  const double m = mean(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(xs.size() - 1);
}

double median(std::vector<double> xs) {
  if (xs.empty()) return kNaN;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double root_mean_square(const std::vector<double>& xs) {
  if (xs.empty()) return kNaN;
  CompensatedSum s;
  for (double x : xs) s.add(x * x);
  return std::sqrt(s.value() / static_cast<double>(xs.size()));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::Config, "normal quantile needs 0 < p < 1", p);
  return boost::math::quantile(standard_normal(), p);
}

double normal_cdf(double x) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return boost::math::cdf(standard_normal(), x);
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  // The alternating series is useless for small lambda; use the theta-function
  // form of the CDF there.
  if (lambda < 1.18) {
    const double y = std::exp(-1.2337005501361697 / (lambda * lambda));  // pi^2 / 8
    const double cdf = 2.5066282746310002 / lambda * (y + std::pow(y, 9) + std::pow(y, 25) + std::pow(y, 49));
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * q, 0.0, 1.0);
}

KsResult ks_test_normal(std::vector<double> xs) {
  if (xs.empty()) throw Error(ErrorKind::InsufficientData, "KS test on an empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double root = std::sqrt(n);
  return {d, kolmogorov_survival((root + 0.12 + 0.11 / root) * d), xs.size()};
}

KsResult ks_test_studentized(const std::vector<double>& xs) {
  const double m = mean(xs);
  const double sd = std::sqrt(sample_variance(xs));
  if (!(sd > 0.0)) throw Error(ErrorKind::InsufficientData, "KS test needs a sample with positive spread", sd);
  std::vector<double> z;
  z.reserve(xs.size());
  for (double x : xs) z.push_back((x - m) / sd);
  return ks_test_normal(std::move(z));
}

std::vector<std::pair<double, double>> qq_normal(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.emplace_back(normal_quantile((static_cast<double>(i) + 0.5) / n), xs[i]);
  }
  return out;
}

}  // namespace cbi2
