#include "cbi2/mat2.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cbi2/error.hpp"

namespace cbi2 {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, std::string(what) + " has a non-finite entry", x);
}

// Splits M = s*I + N with N traceless, so that N*N = q*I.
struct Traceless {
  double s;
  double q;
  Mat2 n;
};

Traceless split(const Mat2& m) {
  const double s = 0.5 * m.trace();
  const double h = 0.5 * (m.m11() - m.m22());
  const double q = h * h + m.m12() * m.m21();
  return {s, q, Mat2(h, m.m12(), m.m21(), -h)};
}

}  // namespace

Vec2::Vec2(double v1, double v2) : v_{v1, v2} {
  require_finite(v1, "Vec2");
  require_finite(v2, "Vec2");
}

Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.v1() + b.v1(), a.v2() + b.v2()}; }
Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.v1() - b.v1(), a.v2() - b.v2()}; }
Vec2 operator-(const Vec2& a) { return {-a.v1(), -a.v2()}; }
Vec2 operator*(double s, const Vec2& a) { return {s * a.v1(), s * a.v2()}; }
Vec2 operator*(const Vec2& a, double s) { return s * a; }
Vec2 operator/(const Vec2& a, double s) { return {a.v1() / s, a.v2() / s}; }
bool operator==(const Vec2& a, const Vec2& b) noexcept { return a.v1() == b.v1() && a.v2() == b.v2(); }
double dot(const Vec2& a, const Vec2& b) noexcept { return a.v1() * b.v1() + a.v2() * b.v2(); }
double norm(const Vec2& a) noexcept { return std::hypot(a.v1(), a.v2()); }
double max_abs(const Vec2& a) noexcept { return std::max(std::abs(a.v1()), std::abs(a.v2())); }
Vec2 positive_part(const Vec2& a) noexcept {
  return {std::max(a.v1(), 0.0), std::max(a.v2(), 0.0)};
}

Vec4::Vec4(double e0, double e1, double e2, double e3) : v_{e0, e1, e2, e3} {
  for (double e : v_) require_finite(e, "Vec4");
}

Vec4 operator+(const Vec4& a, const Vec4& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]}; }
Vec4 operator-(const Vec4& a, const Vec4& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]}; }
Vec4 operator*(double s, const Vec4& a) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }
bool operator==(const Vec4& a, const Vec4& b) noexcept {
  return a[0] == b[0] && a[1] == b[1] && a[2] == b[2] && a[3] == b[3];
}
double dot(const Vec4& a, const Vec4& b) noexcept { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]; }

Mat2::Mat2(double m11, double m12, double m21, double m22) : m_{m11, m12, m21, m22} {
  for (double e : m_) require_finite(e, "Mat2");
}

Mat2 Mat2::identity() noexcept { return Mat2(1.0, 0.0, 0.0, 1.0); }
Mat2 Mat2::diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }
Mat2 Mat2::transpose() const noexcept { return Mat2(m_[0], m_[2], m_[1], m_[3]); }
Vec2 Mat2::column(std::size_t j) const noexcept { return Vec2(m_[j], m_[2 + j]); }
double Mat2::frobenius_norm() const noexcept {
  return std::sqrt(m_[0] * m_[0] + m_[1] * m_[1] + m_[2] * m_[2] + m_[3] * m_[3]);
}
double Mat2::max_abs() const noexcept {
  return std::max({std::abs(m_[0]), std::abs(m_[1]), std::abs(m_[2]), std::abs(m_[3])});
}

Mat2 operator+(const Mat2& a, const Mat2& b) {
  return {a.m11() + b.m11(), a.m12() + b.m12(), a.m21() + b.m21(), a.m22() + b.m22()};
}
Mat2 operator-(const Mat2& a, const Mat2& b) {
  return {a.m11() - b.m11(), a.m12() - b.m12(), a.m21() - b.m21(), a.m22() - b.m22()};
}
Mat2 operator-(const Mat2& a) { return {-a.m11(), -a.m12(), -a.m21(), -a.m22()}; }
Mat2 operator*(const Mat2& a, const Mat2& b) {
  return {a.m11() * b.m11() + a.m12() * b.m21(), a.m11() * b.m12() + a.m12() * b.m22(),
          a.m21() * b.m11() + a.m22() * b.m21(), a.m21() * b.m12() + a.m22() * b.m22()};
}
Mat2 operator*(double s, const Mat2& a) { return {s * a.m11(), s * a.m12(), s * a.m21(), s * a.m22()}; }
Mat2 operator*(const Mat2& a, double s) { return s * a; }
Vec2 operator*(const Mat2& a, const Vec2& x) {
  return {a.m11() * x.v1() + a.m12() * x.v2(), a.m21() * x.v1() + a.m22() * x.v2()};
}
bool operator==(const Mat2& a, const Mat2& b) noexcept {
  return a.m11() == b.m11() && a.m12() == b.m12() && a.m21() == b.m21() && a.m22() == b.m22();
}
Mat2 outer(const Vec2& a, const Vec2& b) {
  return {a.v1() * b.v1(), a.v1() * b.v2(), a.v2() * b.v1(), a.v2() * b.v2()};
}

std::ostream& operator<<(std::ostream& os, const Vec2& v) { return os << '(' << v.v1() << ", " << v.v2() << ')'; }
std::ostream& operator<<(std::ostream& os, const Mat2& m) {
  return os << "[[" << m.m11() << ", " << m.m12() << "], [" << m.m21() << ", " << m.m22() << "]]";
}

EigenPair eigenvalues(const Mat2& m) {
  const auto [s, q, n] = split(m);
  if (q >= 0.0) {
    const double r = std::sqrt(q);
    // Take the larger-magnitude root directly and recover the other from
    // the determinant to avoid cancellation.
    const double big = s >= 0.0 ? s + r : s - r;
    const double small = big != 0.0 ? m.det() / big : 0.0;
    const double lo = std::min(big, small);
    const double hi = std::max(big, small);
    return {std::complex<double>(lo, 0.0), std::complex<double>(hi, 0.0)};
  }
  const double w = std::sqrt(-q);
  return {std::complex<double>(s, -w), std::complex<double>(s, w)};
}

double spectral_radius(const Mat2& m) {
  const auto [e1, e2] = eigenvalues(m);
  return std::max(std::abs(e1), std::abs(e2));
}

Mat2 expm(const Mat2& m) {
  const auto [s, q, n] = split(m);
  const double gap = 2.0 * std::sqrt(std::abs(q));
  const double xi1 = std::abs(eigenvalues(m).first);
  // exp(sI + N) = e^s (c0 I + c1 N) with c0 = cosh(sqrt q), c1 = sinh(sqrt q)/sqrt q.
  double c0 = 1.0;
  double c1 = 1.0;
  if (gap < 1e-8 * (1.0 + xi1)) {
    c0 = 1.0 + 0.5 * q;
    c1 = 1.0 + q / 6.0;
  } else if (std::abs(q) < 1.0) {
    double term0 = 1.0;
    double term1 = 1.0;
    for (int k = 1; k <= 20; ++k) {
      term0 *= q / ((2.0 * k - 1.0) * (2.0 * k));
      term1 *= q / ((2.0 * k) * (2.0 * k + 1.0));
      c0 += term0;
      c1 += term1;
    }
  } else if (q > 0.0) {
    const double r = std::sqrt(q);
    c0 = std::cosh(r);
    c1 = std::sinh(r) / r;
  } else {
    const double w = std::sqrt(-q);
    c0 = std::cos(w);
    c1 = std::sin(w) / w;
  }
  const double es = std::exp(s);
  const double r11 = es * (c0 + c1 * n.m11());
  const double r12 = es * c1 * n.m12();
  const double r21 = es * c1 * n.m21();
  const double r22 = es * (c0 + c1 * n.m22());
  for (double e : {r11, r12, r21, r22}) {
    if (!std::isfinite(e)) throw Error(ErrorKind::Overflow, "matrix exponential exceeds the representable range", e);
  }
  return {r11, r12, r21, r22};
}

Mat2 logm(const Mat2& m) {
  const auto ev = eigenvalues(m);
  const double min_re = std::min(ev.first.real(), ev.second.real());
  if (!(min_re > 0.0)) {
    throw Error(ErrorKind::NonPositiveSpectrum, "principal logarithm needs eigenvalues with positive real part",
                min_re);
  }
  const auto [s, q, n] = split(m);
  const double x = q / (s * s);
  // log(sI + N) = alpha I + beta N; alpha = log(det)/2, beta = atanh(r/s)/r
  // (or atan(w/s)/w for a complex pair). Both share the series in x.
  const double alpha = std::log(s) + 0.5 * std::log1p(-x);
  double beta = 0.0;
  if (std::abs(x) < 1e-3) {
    double xk = 1.0;
    for (int k = 0; k <= 8; ++k) {
      beta += xk / (2.0 * k + 1.0);
      xk *= x;
    }
    beta /= s;
  } else if (q > 0.0) {
    const double r = std::sqrt(q);
    beta = std::atanh(r / s) / r;
  } else {
    const double w = std::sqrt(-q);
    beta = std::atan(w / s) / w;
  }
  return alpha * Mat2::identity() + beta * n;
}

Mat2 logm_series(const Mat2& m) {
  const Mat2 d = m - Mat2::identity();
  const double rho = spectral_radius(d);
  if (!(rho < 1.0)) throw Error(ErrorKind::SeriesDivergence, "spectral radius of M - I is not below one", rho);
  Mat2 power = d;
  Mat2 sum = d;
  constexpr int max_terms = 200000;
  for (int k = 2; k <= max_terms; ++k) {
    power = power * d;
    const double sign = (k % 2 == 0) ? -1.0 : 1.0;
    const Mat2 term = (sign / k) * power;
    sum = sum + term;
    if (term.max_abs() <= 1e-17 * std::max(sum.max_abs(), 1e-300)) return sum;
  }
  throw Error(ErrorKind::SeriesDivergence, "logarithm series did not converge", rho);
}

Mat2 inverse(const Mat2& m) {
  const double det = m.det();
  if (!(std::abs(det) > 1e-14 * m.frobenius_norm())) {
    throw Error(ErrorKind::Singular, "matrix is numerically singular", det);
  }
  return Mat2(m.m22() / det, -m.m12() / det, -m.m21() / det, m.m11() / det);
}

Vec4 vec(const Mat2& m) noexcept { return Vec4(m.m11(), m.m21(), m.m12(), m.m22()); }

Mat2 unvec(const Vec4& v) { return {v[0], v[2], v[1], v[3]}; }

}  // namespace cbi2
