#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "topoband/common.hpp"

namespace topoband {

// Root of f on [a,b] with f(a)*f(b) <= 0.  Stops when the bracket width drops
// below xtol or |f| below ftol.
template <typename F>
double bisect(F&& f, double a, double b, double fa, double fb,
              double xtol = 1e-13, double ftol = 0.0, int max_iter = 200) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw NumericalError("bisect: endpoints do not bracket a root");
  for (int i = 0; i < max_iter; ++i) {
    double m = 0.5 * (a + b);
    double fm = f(m);
    if (fm == 0.0 || (ftol > 0.0 && std::abs(fm) < ftol)) return m;
    if (fa * fm < 0.0) {
      b = m;
    } else {
      a = m;
      fa = fm;
    }
    if (b - a < xtol * (1.0 + std::abs(a))) break;
  }
  return 0.5 * (a + b);
}

template <typename F>
double bisect(F&& f, double a, double b, double xtol = 1e-13) {
  double fa = f(a), fb = f(b);
  return bisect(f, a, b, fa, fb, xtol);
}

// Minimizer of f on [a,b] by golden-section search.
template <typename F>
double golden_min(F&& f, double a, double b, double xtol = 1e-11) {
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > xtol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Composite Simpson weights for n uniformly spaced nodes (n odd, n >= 3)
// spanning an interval of length len.
inline std::vector<double> simpson_weights(std::size_t n, double len) {
  if (n < 3 || n % 2 == 0) throw NumericalError("simpson_weights: need odd n >= 3");
  double h = len / double(n - 1);
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i + 2 < n; i += 2) {
    w[i] += h / 3.0;
    w[i + 1] += 4.0 * h / 3.0;
    w[i + 2] += h / 3.0;
  }
  return w;
}

// Prefix integrals of uniformly sampled values: out[i] ~ integral of f over the
// first i intervals.  Fourth order: Simpson on even prefixes, Simpson plus a
// cubic half-panel correction on odd ones.
template <typename T>
std::vector<T> cumulative_simpson(const std::vector<T>& f, double h) {
  std::size_t n = f.size();
  std::vector<T> out(n);
  if (n == 0) return out;
  out[0] = T{};
  if (n == 1) return out;
  for (std::size_t i = 2; i < n; i += 2)
    out[i] = out[i - 2] + (f[i - 2] + f[i - 1] * 4.0 + f[i]) * (h / 3.0);
  // Odd index: integrate the last half panel with the cubic through the four
  // nearest nodes (3/8-style end correction).
  for (std::size_t i = 1; i < n; i += 2) {
    if (i + 2 < n) {
      out[i] = out[i - 1] + (f[i - 1] * 9.0 + f[i] * 19.0 - f[i + 1] * 5.0 + f[i + 2]) * (h / 24.0);
    } else if (i >= 3) {
      out[i] = out[i - 1] + (f[i - 3] * 1.0 - f[i - 2] * 5.0 + f[i - 1] * 19.0 + f[i] * 9.0) * (h / 24.0);
    } else {
      out[i] = out[i - 1] + (f[i - 1] + f[i]) * (h / 2.0);
    }
  }
  return out;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ValidationError("least_squares: need two or more paired samples");
  std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("least_squares: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

// Distance between two angles modulo 2*pi, in [0, pi].
inline double angle_dist(double a, double b) {
  double d = std::fmod(a - b, 2.0 * kPi);
  if (d < 0) d += 2.0 * kPi;
  return std::min(d, 2.0 * kPi - d);
}

inline double reduce_mod_2pi(double a) {
  double d = std::fmod(a, 2.0 * kPi);
  if (d < 0) d += 2.0 * kPi;
  return d;
}

}  // namespace topoband
