#pragma once

#include <cmath>
#include <complex>

namespace topoband {

template <typename T>
struct Vec2 {
  T x{}, y{};

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(T s) const { return {x * s, y * s}; }
};

template <typename T>
double vec_norm(const Vec2<T>& v) {
  return std::sqrt(std::norm(std::complex<double>(v.x)) + std::norm(std::complex<double>(v.y)));
}

inline double vec_norm(const Vec2<double>& v) { return std::hypot(v.x, v.y); }

// 2x2 matrix, row-major.  T is double or std::complex<double>.
template <typename T>
struct Mat2 {
  T a11{}, a12{}, a21{}, a22{};

  static Mat2 identity() { return {T(1), T(0), T(0), T(1)}; }

  T det() const { return a11 * a22 - a12 * a21; }
  T trace() const { return a11 + a22; }

  Mat2 operator*(const Mat2& o) const {
    return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
            a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
  }
  Vec2<T> operator*(const Vec2<T>& v) const {
    return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
  }
  Mat2 operator+(const Mat2& o) const {
    return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
  }
  Mat2 operator-(const Mat2& o) const {
    return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22};
  }
  Mat2 operator*(T s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

  // Valid for det == 1 (the only case this library needs).
  Mat2 unimodular_inverse() const { return {a22, -a12, -a21, a11}; }
};

template <typename T>
Mat2<T> commutator(const Mat2<T>& a, const Mat2<T>& b) {
  return a * b - b * a;
}

template <typename T>
double mat_norm_inf(const Mat2<T>& m) {
  double n = 0.0;
  for (double v : {std::abs(std::complex<double>(m.a11)), std::abs(std::complex<double>(m.a12)),
                   std::abs(std::complex<double>(m.a21)), std::abs(std::complex<double>(m.a22))})
    n = std::max(n, v);
  return n;
}

template <typename T>
Mat2<T> mat_pow(Mat2<T> m, long long n) {
  if (n < 0) return mat_pow(m.unimodular_inverse(), -n);
  Mat2<T> r = Mat2<T>::identity();
  while (n > 0) {
    if (n & 1) r = r * m;
    m = m * m;
    n >>= 1;
  }
  return r;
}

}  // namespace topoband
