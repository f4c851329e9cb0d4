#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "topoband/medium.hpp"
#include "topoband/numerics.hpp"
#include "topoband/propagator.hpp"

namespace topoband {

namespace detail {

inline void validate_sizes(const FiniteStructure& fs) {
  if (fs.n1 > 0 || fs.n2 < 0)
    throw ValidationError("finite structure: need n1 <= 0 <= n2");
  if (-fs.n1 + fs.n2 < 1)
    throw ValidationError("finite structure: need at least one cell");
}

struct MismatchEval {
  cplx f;        // outgoing-wave defect at the right end
  double scale;  // |omega psi| + |flux| there, for a relative residual
};

// Solution launched as a left-outgoing wave at x = n1 and propagated through
// all cells; resonances are the omegas where it is also right-outgoing.
inline MismatchEval outgoing_mismatch(const FiniteStructure& fs, cplx omega) {
  validate_sizes(fs);
  const cplx i_omega = cplx(0.0, 1.0) * omega;
  Vec2<cplx> u{1.0, -i_omega};
  if (fs.n1 < 0) u = mat_pow(complex_monodromy(fs.left, omega).m, -fs.n1) * u;
  if (fs.n2 > 0) u = mat_pow(complex_monodromy(fs.right, omega).m, fs.n2) * u;
  MismatchEval ev;
  ev.f = u.y - i_omega * u.x;
  ev.scale = std::abs(i_omega * u.x) + std::abs(u.y);
  return ev;
}

}  // namespace detail

inline cplx resonance_mismatch(const FiniteStructure& fs, cplx omega) {
  return detail::outgoing_mismatch(fs, omega).f;
}

// Relative outgoing-wave defect; ~1e-10 or below at a converged resonance.
inline double resonance_residual(const FiniteStructure& fs, cplx omega) {
  auto ev = detail::outgoing_mismatch(fs, omega);
  return std::abs(ev.f) / (ev.scale + 1e-300);
}

struct Resonance {
  cplx omega;
  double residual = 0.0;
  int n1 = 0, n2 = 0;
};

namespace detail {

// Derivative estimate that exploits analyticity: average the real-step and
// imaginary-step central differences.
inline cplx mismatch_derivative(const FiniteStructure& fs, cplx w) {
  double h = 1e-6 * (1.0 + std::abs(w));
  cplx fr = (outgoing_mismatch(fs, w + h).f - outgoing_mismatch(fs, w - h).f) / (2.0 * h);
  cplx ih = cplx(0.0, h);
  cplx fi = (outgoing_mismatch(fs, w + ih).f - outgoing_mismatch(fs, w - ih).f) / (2.0 * ih);
  return 0.5 * (fr + fi);
}

inline bool newton_resonance(const FiniteStructure& fs, cplx seed, double radius, cplx& w_out) {
  cplx w = seed;
  for (int it = 0; it < 60; ++it) {
    cplx f = outgoing_mismatch(fs, w).f;
    cplx d = mismatch_derivative(fs, w);
    if (std::abs(d) < 1e-300) return false;
    cplx step = -f / d;
    double cap = 0.25 * radius;
    if (std::abs(step) > cap) step *= cap / std::abs(step);
    w += step;
    if (std::abs(step) < 1e-13 * (1.0 + std::abs(w))) {
      w_out = w;
      return true;
    }
  }
  return false;
}

inline bool muller_resonance(const FiniteStructure& fs, cplx seed, double radius, cplx& w_out) {
  double s = 0.05 * radius;
  cplx z0 = seed, z1 = seed + cplx(s, -s), z2 = seed + cplx(-s, -2.0 * s);
  cplx f0 = outgoing_mismatch(fs, z0).f;
  cplx f1 = outgoing_mismatch(fs, z1).f;
  cplx f2 = outgoing_mismatch(fs, z2).f;
  for (int it = 0; it < 80; ++it) {
    cplx h1 = z1 - z0, h2 = z2 - z1;
    if (std::abs(h1) < 1e-300 || std::abs(h2) < 1e-300) break;
    cplx d1 = (f1 - f0) / h1, d2 = (f2 - f1) / h2;
    cplx dd = (d2 - d1) / (h2 + h1);
    cplx b = d2 + h2 * dd;
    cplx disc = std::sqrt(b * b - 4.0 * f2 * dd);
    cplx den = std::abs(b + disc) >= std::abs(b - disc) ? b + disc : b - disc;
    cplx dz;
    if (std::abs(den) < 1e-300) {
      if (std::abs(d2) < 1e-300) break;
      dz = -f2 / d2;
    } else {
      dz = -2.0 * f2 / den;
    }
    double cap = 0.3 * radius;
    if (std::abs(dz) > cap) dz *= cap / std::abs(dz);
    cplx z3 = z2 + dz;
    z0 = z1;
    f0 = f1;
    z1 = z2;
    f1 = f2;
    z2 = z3;
    f2 = outgoing_mismatch(fs, z3).f;
    if (std::abs(dz) < 1e-13 * (1.0 + std::abs(z3))) {
      w_out = z3;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Polish a single resonance from `seed`; accepted only inside the given
// radius, in the lower half plane, with a small relative residual.
inline Resonance find_resonance_near(const FiniteStructure& fs, cplx seed, double radius) {
  detail::validate_sizes(fs);
  if (!(radius > 0.0)) throw ValidationError("find_resonance_near: radius must be positive");
  cplx w;
  bool ok = detail::newton_resonance(fs, seed, radius, w);
  if (!ok || std::abs(w - seed) > radius || resonance_residual(fs, w) > 1e-9)
    ok = detail::muller_resonance(fs, seed, radius, w);
  if (!ok) throw NumericalError("find_resonance_near: iteration did not converge");
  double res = resonance_residual(fs, w);
  if (std::abs(w - seed) > radius)
    throw NumericalError("find_resonance_near: converged outside the search radius");
  if (w.imag() >= 0.0)
    throw NumericalError("find_resonance_near: converged to the closed upper half plane");
  if (res > 1e-9) throw NumericalError("find_resonance_near: residual did not converge");
  return {w, res, fs.n1, fs.n2};
}

// Resonances of the truncations (n1, n2) = (-N, N) listed in `sizes`,
// continuing each from the previous size toward the interface-mode frequency
// omega_inf of the infinite structure.
inline std::vector<Resonance> resonance_family(const MediumProfile& left,
                                               const MediumProfile& right,
                                               const std::vector<int>& sizes, double omega_inf) {
  std::vector<Resonance> out;
  cplx prev{};
  bool have_prev = false;
  for (int N : sizes) {
    if (N < 1) throw ValidationError("resonance_family: sizes must be >= 1");
    FiniteStructure fs{left, right, -N, N};
    std::vector<cplx> seeds;
    if (have_prev) {
      seeds.push_back(omega_inf + 0.25 * (prev - omega_inf));
      seeds.push_back(prev);
    }
    seeds.push_back(cplx(omega_inf, -0.05));
    seeds.push_back(cplx(omega_inf, -0.15));
    seeds.push_back(cplx(omega_inf, -0.3));
    double radius = std::max(0.6, 0.05 * omega_inf);
    Resonance r{};
    bool found = false;
    for (const auto& s : seeds) {
      try {
        r = find_resonance_near(fs, s, radius);
        found = true;
        break;
      } catch (const NumericalError&) {
        continue;
      }
    }
    if (!found)
      throw NumericalError("resonance_family: no resonance converged for one of the sizes");
    out.push_back(r);
    prev = r.omega;
    have_prev = true;
  }
  return out;
}

struct DecayFit {
  double alpha = 0.0;  // |omega_N - omega_inf| ~ c exp(-alpha N)
  double c = 0.0;
  double r_squared = 0.0;
};

inline DecayFit decay_fit(const std::vector<Resonance>& rs, double omega_inf) {
  std::vector<double> xs, ys;
  for (const auto& r : rs) {
    double N = double(std::min(-r.n1, r.n2));
    double d = std::abs(r.omega - omega_inf);
    if (d <= 0.0) continue;
    xs.push_back(N);
    ys.push_back(std::log(d));
  }
  std::vector<double> uniq = xs;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < 3)
    throw ValidationError("decay_fit: need resonances at three or more distinct sizes");
  auto fit = least_squares(xs, ys);
  return {-fit.slope, std::exp(fit.intercept), fit.r_squared};
}

struct Scattering {
  double omega = 0.0;
  cplx t, r;
};

// Plane-wave scattering off the finite structure embedded in vacuum:
// psi = e^{i omega x} + r e^{-i omega x} on the left, t e^{i omega x} on the
// right.  Lossless media give |t|^2 + |r|^2 = 1.
inline Scattering transmission(const FiniteStructure& fs, double omega) {
  detail::validate_sizes(fs);
  if (!(omega > 0.0)) throw ValidationError("transmission: omega must be positive");
  double E = omega * omega;
  Mat2<double> T = Mat2<double>::identity();
  if (fs.n1 < 0) T = mat_pow(monodromy_matrix<double>(fs.left, E), -fs.n1);
  if (fs.n2 > 0) T = mat_pow(monodromy_matrix<double>(fs.right, E), fs.n2) * T;

  const cplx iw(0.0, omega);
  auto at = [&](double x) { return std::exp(iw * x); };
  Vec2<cplx> a{at(fs.n1), iw * at(fs.n1)};
  Vec2<cplx> b{1.0 / at(fs.n1), -iw / at(fs.n1)};
  Vec2<cplx> c{at(fs.n2), iw * at(fs.n2)};
  auto apply = [&](const Vec2<cplx>& v) {
    return Vec2<cplx>{T.a11 * v.x + T.a12 * v.y, T.a21 * v.x + T.a22 * v.y};
  };
  Vec2<cplx> Ta = apply(a), Tb = apply(b);
  // Solve r Tb - t c = -Ta.
  cplx det = -Tb.x * c.y + c.x * Tb.y;
  if (std::abs(det) < 1e-300) throw NumericalError("transmission: singular matching system");
  Scattering s;
  s.omega = omega;
  s.r = (Ta.x * c.y - c.x * Ta.y) / det;
  s.t = (Tb.y * Ta.x - Tb.x * Ta.y) / det;
  return s;
}

}  // namespace topoband
