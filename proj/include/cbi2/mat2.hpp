#pragma once

// Fixed-size 2x2 real linear algebra: everything the two-type model needs,
// computed in closed form without allocation.

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <utility>

namespace cbi2 {

class Vec2 {
 public:
  constexpr Vec2() = default;
  Vec2(double v1, double v2);

  double v1() const noexcept { return v_[0]; }
  double v2() const noexcept { return v_[1]; }
  double operator[](std::size_t i) const noexcept { return v_[i]; }

  static Vec2 zero() noexcept { return {}; }

 private:
  std::array<double, 2> v_{};
};

Vec2 operator+(const Vec2& a, const Vec2& b);
Vec2 operator-(const Vec2& a, const Vec2& b);
Vec2 operator-(const Vec2& a);
Vec2 operator*(double s, const Vec2& a);
Vec2 operator*(const Vec2& a, double s);
Vec2 operator/(const Vec2& a, double s);
bool operator==(const Vec2& a, const Vec2& b) noexcept;
double dot(const Vec2& a, const Vec2& b) noexcept;
double norm(const Vec2& a) noexcept;
double max_abs(const Vec2& a) noexcept;
Vec2 positive_part(const Vec2& a) noexcept;

/// Column-stacked image of a Mat2: (m11, m21, m12, m22).
class Vec4 {
 public:
  constexpr Vec4() = default;
  Vec4(double e0, double e1, double e2, double e3);

  double operator[](std::size_t i) const noexcept { return v_[i]; }

 private:
  std::array<double, 4> v_{};
};

Vec4 operator+(const Vec4& a, const Vec4& b);
Vec4 operator-(const Vec4& a, const Vec4& b);
Vec4 operator*(double s, const Vec4& a);
bool operator==(const Vec4& a, const Vec4& b) noexcept;
double dot(const Vec4& a, const Vec4& b) noexcept;

class Mat2 {
 public:
  constexpr Mat2() = default;
  /// Entries given in row-major order.
  Mat2(double m11, double m12, double m21, double m22);

  static Mat2 identity() noexcept;
  static Mat2 zero() noexcept { return {}; }
  static Mat2 diag(double d1, double d2);

  double m11() const noexcept { return m_[0]; }
  double m12() const noexcept { return m_[1]; }
  double m21() const noexcept { return m_[2]; }
  double m22() const noexcept { return m_[3]; }
  /// Zero-based (row, column).
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_[2 * i + j]; }

  double trace() const noexcept { return m_[0] + m_[3]; }
  double det() const noexcept { return m_[0] * m_[3] - m_[1] * m_[2]; }
  Mat2 transpose() const noexcept;
  Vec2 column(std::size_t j) const noexcept;
  double frobenius_norm() const noexcept;
  double max_abs() const noexcept;

 private:
  std::array<double, 4> m_{};
};

Mat2 operator+(const Mat2& a, const Mat2& b);
Mat2 operator-(const Mat2& a, const Mat2& b);
Mat2 operator-(const Mat2& a);
Mat2 operator*(const Mat2& a, const Mat2& b);
Mat2 operator*(double s, const Mat2& a);
Mat2 operator*(const Mat2& a, double s);
Vec2 operator*(const Mat2& a, const Vec2& x);
bool operator==(const Mat2& a, const Mat2& b) noexcept;
Mat2 outer(const Vec2& a, const Vec2& b);

std::ostream& operator<<(std::ostream& os, const Vec2& v);
std::ostream& operator<<(std::ostream& os, const Mat2& m);

using EigenPair = std::pair<std::complex<double>, std::complex<double>>;

/// Roots of the characteristic polynomial, ordered by real part ascending
/// (ties broken by imaginary part).
EigenPair eigenvalues(const Mat2& m);

/// Matrix exponential. Throws Overflow when the result is not representable.
Mat2 expm(const Mat2& m);

/// Principal matrix logarithm. Throws NonPositiveSpectrum when an
/// eigenvalue has nonpositive real part.
Mat2 logm(const Mat2& m);

/// Mercator series sum_{k>=1} (-1)^{k-1} (M - I)^k / k. Converges only when
/// the spectral radius of M - I is below one; throws SeriesDivergence
/// otherwise.
Mat2 logm_series(const Mat2& m);

/// Throws Singular (value = determinant) when |det| <= 1e-14 * ||M||_F.
Mat2 inverse(const Mat2& m);

Vec4 vec(const Mat2& m) noexcept;
Mat2 unvec(const Vec4& v);

double spectral_radius(const Mat2& m);

}  // namespace cbi2
