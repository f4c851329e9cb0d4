#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "topoband/bloch.hpp"
#include "topoband/medium.hpp"
#include "topoband/numerics.hpp"
#include "topoband/propagator.hpp"
#include "topoband/spectrum.hpp"

namespace topoband {

enum class Side { left, right };

// Interface impedance of a semi-infinite crystal at energy E inside a gap:
// xi = psi(0) / flux(0) of the solution decaying away from the interface.
// A right half-line decays with lambda1 (|lambda1| < 1), a left one with
// lambda2.
inline double impedance(const MediumProfile& p, Side side, double E) {
  auto f = floquet_eigen(monodromy(p, E));
  if (f.regime != Regime::gap)
    throw ValidationError("impedance: E does not lie in a spectral gap");
  double lam = (side == Side::right ? f.lambda1 : f.lambda2).real();
  auto M = monodromy_matrix<double>(p, E);
  double den = lam - M.a11;
  if (std::abs(den) < 1e-300) throw NumericalError("impedance: pole at this energy");
  return M.a12 / den;
}

struct ImpedancePoint {
  double energy = 0.0;
  double xi = 0.0;
};

struct CommonGap {
  double lo = 0.0, hi = 0.0;
  int band1 = 0, band2 = 0;  // gap sits above this band in each crystal
};

namespace detail {

struct GapInterval {
  double lo, hi;
  int band;
};

inline std::vector<GapInterval> open_gaps(const MediumProfile& p, double e_max) {
  auto set = band_edges(p, e_max);
  std::vector<GapInterval> g;
  for (const auto& band : set.bands) {
    if (band.upper_kind == EdgeKind::touching) continue;  // closed gap
    // The gap needs only the next edge up (the following band's lower edge),
    // which is known even when that band is truncated at e_max.
    double lo = band.e_plus;
    for (const auto& e : set.edges) {
      if (e.energy <= lo * (1.0 + 1e-12) + 1e-12) continue;
      if (e.energy - lo > 1e-9 * (1.0 + std::abs(e.energy)))
        g.push_back({lo, e.energy, band.index});
      break;
    }
  }
  return g;
}

}  // namespace detail

// Overlaps of the open spectral gaps of two crystals below e_max.
inline std::vector<CommonGap> common_gaps(const MediumProfile& p1, const MediumProfile& p2,
                                          double e_max = 400.0) {
  auto g1 = detail::open_gaps(p1, e_max);
  auto g2 = detail::open_gaps(p2, e_max);
  std::vector<CommonGap> out;
  for (const auto& a : g1)
    for (const auto& b : g2) {
      double lo = std::max(a.lo, b.lo), hi = std::min(a.hi, b.hi);
      if (hi - lo > 1e-9 * (1.0 + std::abs(hi))) out.push_back({lo, hi, a.band, b.band});
    }
  std::sort(out.begin(), out.end(), [](const CommonGap& a, const CommonGap& b) {
    return a.lo < b.lo;
  });
  return out;
}

inline CommonGap common_gap(const MediumProfile& p1, const MediumProfile& p2,
                            double e_max = 400.0) {
  auto gaps = common_gaps(p1, p2, e_max);
  if (gaps.empty())
    throw ValidationError("common_gap: the crystals share no open gap below e_max");
  return gaps.front();
}

inline std::vector<ImpedancePoint> impedance_curve(const MediumProfile& p, Side side,
                                                   double e_lo, double e_hi,
                                                   std::size_t n = 400) {
  std::vector<ImpedancePoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    double E = e_lo + (e_hi - e_lo) * (double(i) + 0.5) / double(n);
    out.push_back({E, impedance(p, side, E)});
  }
  return out;
}

// Localized state at a (possibly defected) junction of two semi-infinite
// crystals.  psi is real in a gap; samples cover n_periods cells on each side
// plus the defect region.
struct InterfaceMode {
  double energy = 0.0;
  double omega = 0.0;       // sqrt(E)
  double decay_left = 0.0;  // per-period amplitude factor, < 1
  double decay_right = 0.0;
  double residual = 0.0;  // collinearity defect of the two decaying solutions
  std::vector<double> x, psi, flux;
};

namespace detail {

inline double dot(const Vec2<double>& a, const Vec2<double>& b) {
  return a.x * b.x + a.y * b.y;
}

// Matching determinant h(E) = det[M_d V2_left, V1_right] with unit decaying
// eigenvectors, sign-fixed against the previous evaluation so h is continuous
// across the gap (no poles, unlike the impedance difference).
class MatchingDet {
 public:
  MatchingDet(const MediumProfile& p1, const MediumProfile& p2, const DefectSpec& defect)
      : p1_(p1), p2_(p2), defect_(defect) {}

  double operator()(double E) {
    auto f1 = floquet_eigen(monodromy(p1_, E));
    auto f2 = floquet_eigen(monodromy(p2_, E));
    if (f1.regime != Regime::gap || f2.regime != Regime::gap)
      throw ValidationError("interface mode search: energy left the common gap");
    Vec2<double> a{f1.v2.x.real(), f1.v2.y.real()};
    Vec2<double> b{f2.v1.x.real(), f2.v1.y.real()};
    if (primed_) {
      if (dot(a, pa_) < 0.0) a = a * -1.0;
      if (dot(b, pb_) < 0.0) b = b * -1.0;
    }
    pa_ = a;
    pb_ = b;
    primed_ = true;
    Vec2<double> va = defect_.empty() ? a : defect_transfer(defect_, E).m * a;
    return va.x * b.y - va.y * b.x;
  }

 private:
  const MediumProfile& p1_;
  const MediumProfile& p2_;
  const DefectSpec& defect_;
  Vec2<double> pa_{}, pb_{};
  bool primed_ = false;
};

}  // namespace detail

// Sampled mode profile at a validated matching energy.
inline InterfaceMode assemble_interface_mode(const MediumProfile& p1, const MediumProfile& p2,
                                             const DefectSpec& defect, double E,
                                             std::size_t n_periods = 4,
                                             std::size_t resolution = 128) {
  auto f1 = floquet_eigen(monodromy(p1, E));
  auto f2 = floquet_eigen(monodromy(p2, E));
  if (f1.regime != Regime::gap || f2.regime != Regime::gap)
    throw ValidationError("interface mode: E does not lie in a common gap");
  Vec2<double> a{f1.v2.x.real(), f1.v2.y.real()};
  Vec2<double> b{f2.v1.x.real(), f2.v1.y.real()};
  Mat2<double> Md = defect_transfer(defect, E).m;
  Vec2<double> va = Md * a;

  InterfaceMode m;
  m.energy = E;
  m.omega = std::sqrt(E);
  m.decay_left = 1.0 / std::abs(f1.lambda2);
  m.decay_right = std::abs(f2.lambda1);
  m.residual = std::abs(va.x * b.y - va.y * b.x) / (vec_norm(va) * vec_norm(b));

  double lam2 = f1.lambda2.real();
  double lam1 = f2.lambda1.real();
  auto grid1 = detail::make_sample_grid(p1, resolution);
  auto psi1 = detail::psi_on_grid(p1, E, grid1);
  auto grid2 = detail::make_sample_grid(p2, resolution);
  auto psi2 = detail::psi_on_grid(p2, E, grid2);

  // Left tail: U(d1 - c - 1 + t) = Psi_1(t) a lambda2^{-(c+1)}.
  for (std::size_t c = n_periods; c >= 1; --c) {
    double amp = std::pow(lam2, -double(c));
    for (std::size_t i = 0; i < grid1.x.size(); ++i) {
      Vec2<double> u = psi1[i] * (a * amp);
      m.x.push_back(defect.d1 - double(c) + grid1.x[i]);
      m.psi.push_back(u.x);
      m.flux.push_back(u.y);
    }
  }
  // Defect region.
  Mat2<double> part = Mat2<double>::identity();
  double x0 = defect.d1;
  for (const auto& l : defect.layers) {
    const std::size_t n = 64;
    for (std::size_t i = 0; i < n; ++i) {
      double t = double(i) / double(n);
      Vec2<double> u = (layer_matrix_energy(l.eps, l.mu, t * l.width, E) * part) * a;
      m.x.push_back(x0 + t * l.width);
      m.psi.push_back(u.x);
      m.flux.push_back(u.y);
    }
    part = layer_matrix_energy(l.eps, l.mu, l.width, E) * part;
    x0 += l.width;
  }
  // Right tail: U(d2 + c + t) = Psi_2(t) (M_d a) lambda1^c.
  for (std::size_t c = 0; c < n_periods; ++c) {
    double amp = std::pow(lam1, double(c));
    for (std::size_t i = 0; i < grid2.x.size(); ++i) {
      Vec2<double> u = psi2[i] * (va * amp);
      m.x.push_back(defect.d2 + double(c) + grid2.x[i]);
      m.psi.push_back(u.x);
      m.flux.push_back(u.y);
    }
  }
  double amp = 0.0;
  for (double v : m.psi) amp = std::max(amp, std::abs(v));
  if (amp > 0.0)
    for (std::size_t i = 0; i < m.psi.size(); ++i) {
      m.psi[i] /= amp;
      m.flux[i] /= amp;
    }
  return m;
}

struct DefectScanResult {
  std::vector<InterfaceMode> modes;                // ascending energy
  std::vector<std::pair<double, double>> samples;  // (E, h) over the scan
};

// Root scan of the matching determinant over every common gap below e_max.
// 400 samples per gap, sign-change cells refined fourfold, then bisection.
// When both crystals are inversion-symmetric and their bulk indices across a
// gap differ, a mode is guaranteed there; finding none is a hard error.
inline DefectScanResult defect_mode_search(const MediumProfile& p1, const MediumProfile& p2,
                                           const DefectSpec& defect, double e_max = 400.0,
                                           std::size_t n_scan = 400) {
  double layer_total = 0.0;
  for (const auto& l : defect.layers) layer_total += l.width;
  if (std::abs(layer_total - defect.width()) > 1e-12 * (1.0 + std::abs(defect.width())))
    throw ValidationError("defect_mode_search: defect layers do not fill (d1, d2)");
  if (defect.d1 > 0.0 || defect.d2 < 0.0)
    throw ValidationError("defect_mode_search: need d1 <= 0 <= d2");

  DefectScanResult out;
  auto gaps = common_gaps(p1, p2, e_max);
  // Opposite bulk indices force a mode only across the bare junction; a wide
  // defect can legitimately empty the gap.
  bool guaranteed = defect.empty() && is_inversion_symmetric(p1) && is_inversion_symmetric(p2);
  for (const auto& gap : gaps) {
    std::size_t found_before = out.modes.size();
    double inset = (gap.hi - gap.lo) * 1e-5;
    double lo = gap.lo + inset, hi = gap.hi - inset;
    detail::MatchingDet h(p1, p2, defect);
    double e_prev = 0.0, h_prev = 0.0;
    bool have_prev = false;
    std::size_t n_valid = 0;
    for (std::size_t i = 0; i < n_scan; ++i) {
      double E = lo + (hi - lo) * double(i) / double(n_scan - 1);
      double v;
      try {
        v = h(E);
      } catch (const ValidationError&) {
        // Edge-regime sample (hair-thin gap or inset too tight): skip it and
        // restart the sign chain.
        have_prev = false;
        continue;
      }
      ++n_valid;
      out.samples.push_back({E, v});
      if (have_prev && h_prev * v < 0.0) {
        // Refine fourfold, then bisect each sign-change subcell.
        std::vector<double> es{e_prev}, vs{h_prev};
        for (int s = 1; s <= 3; ++s) {
          double em = e_prev + (E - e_prev) * double(s) / 4.0;
          es.push_back(em);
          vs.push_back(h(em));
        }
        es.push_back(E);
        vs.push_back(v);
        for (std::size_t s = 0; s + 1 < es.size(); ++s) {
          if (vs[s] * vs[s + 1] >= 0.0) continue;
          double root =
              bisect([&](double e) { return h(e); }, es[s], es[s + 1], vs[s], vs[s + 1], 1e-14);
          auto mode = assemble_interface_mode(p1, p2, defect, root);
          if (mode.residual > 1e-6)
            throw NumericalError("defect_mode_search: matching residual failed to converge");
          out.modes.push_back(std::move(mode));
        }
      }
      e_prev = E;
      h_prev = v;
      have_prev = true;
    }
    if (out.modes.size() == found_before && guaranteed && n_valid > n_scan / 2) {
      bool have_indices = true;
      double gamma1 = 0.0, gamma2 = 0.0;
      try {
        gamma1 = bulk_index(p1, gap.band1).gamma;
        gamma2 = bulk_index(p2, gap.band2).gamma;
      } catch (const ValidationError&) {
        have_indices = false;
      }
      if (have_indices && gamma1 != gamma2)
        throw NumericalError(
            "defect_mode_search: bulk indices differ across a common gap but no interface "
            "mode was found");
    }
  }
  std::sort(out.modes.begin(), out.modes.end(),
            [](const InterfaceMode& a, const InterfaceMode& b) { return a.energy < b.energy; });
  return out;
}

// Interface modes of the clean junction (left crystal for x < 0, right for
// x > 0, cells aligned at the interface).
inline std::vector<InterfaceMode> find_interface_modes(const MediumProfile& p1,
                                                       const MediumProfile& p2,
                                                       double e_max = 400.0) {
  return defect_mode_search(p1, p2, DefectSpec{}, e_max).modes;
}

// Sampled profile at a known interface-mode energy of the clean junction.
inline InterfaceMode mode_profile(const MediumProfile& p1, const MediumProfile& p2, double E,
                                  std::size_t n_periods = 4) {
  auto m = assemble_interface_mode(p1, p2, DefectSpec{}, E, n_periods);
  if (m.residual > 1e-6)
    throw ValidationError("mode_profile: E is not an interface-mode energy");
  return m;
}

// Prufer representation: U = (psi, flux) = rho (sin theta, cos theta), so
// theta = atan2(psi, flux) advances strictly monotonically in x wherever
// E > 0; theta_tilde = pi/2 - theta is the polar angle of (psi, flux).
struct PruferState {
  double theta = 0.0;
  double theta_tilde = 0.0;
  double log_rho = 0.0;
};

namespace detail {

// tan(theta_hat) = r tan(theta) continued through the same pi-branch.
inline double scale_angle(double theta, double r) {
  double m = std::floor(theta / kPi + 0.5);
  double d = theta - m * kPi;  // in [-pi/2, pi/2)
  return m * kPi + std::atan2(r * std::sin(d), std::cos(d));
}

}  // namespace detail

// Exact Prufer advance across a constant layer (E > 0): in coordinates
// (psi, sqrt(mu/(E eps)) flux) the flow is a rigid rotation at rate
// sqrt(E eps mu).
inline PruferState prufer_layer(double eps, double mu, double width, double E,
                                const PruferState& s) {
  if (E <= 0.0) throw ValidationError("prufer_layer: requires E > 0");
  double r = std::sqrt(E * eps / mu);
  double a = std::sqrt(E * eps * mu);
  double th0 = detail::scale_angle(s.theta, r);
  double th1 = th0 + a * width;
  PruferState out;
  out.theta = detail::scale_angle(th1, 1.0 / r);
  out.theta_tilde = 0.5 * kPi - out.theta;
  auto rho2 = [&](double th) {
    double sn = std::sin(th), cs = std::cos(th);
    return sn * sn + r * r * cs * cs;
  };
  out.log_rho = s.log_rho + 0.5 * (std::log(rho2(th1)) - std::log(rho2(th0)));
  return out;
}

// Prufer state propagated across the defect layers from d1 to d2.
inline PruferState prufer_evolve(const DefectSpec& d, double E, double theta0) {
  PruferState s;
  s.theta = theta0;
  s.theta_tilde = 0.5 * kPi - theta0;
  for (const auto& l : d.layers) s = prufer_layer(l.eps, l.mu, l.width, E, s);
  return s;
}

// Prufer state propagated through a crystal from x0 to x1 (x1 >= x0).
// Constant pieces advance in closed form; sampled pieces integrate the phase
// equation with RK4.
inline PruferState prufer_evolve(const MediumProfile& p, double E, double theta0, double x0,
                                 double x1) {
  if (E <= 0.0) throw ValidationError("prufer_evolve: requires E > 0");
  if (x1 < x0) throw ValidationError("prufer_evolve: x1 must be >= x0");
  PruferState s;
  s.theta = theta0;
  s.theta_tilde = 0.5 * kPi - theta0;
  auto bp = p.breakpoints();
  double x = x0;
  int guard = 0;
  while (x < x1 - 1e-14 * (1.0 + std::abs(x1))) {
    if (++guard > 1000000) throw NumericalError("prufer_evolve: step count exceeded");
    double xr = MediumProfile::reduce(x);
    auto [ip, t] = p.locate(xr);
    const Piece& pc = p.pieces[ip];
    double piece_end_rel = bp[ip + 1] - xr;  // distance to the piece boundary
    if (piece_end_rel <= 1e-15) piece_end_rel = pc.width;  // landed on a boundary
    double step = std::min(piece_end_rel, x1 - x);
    if (pc.eps.is_constant() && pc.mu.is_constant()) {
      s = prufer_layer(pc.eps.value, pc.mu.value, step, E, s);
    } else {
      // RK4 on (theta, log rho) over the sampled piece segment.
      const std::size_t n_sub = std::max<std::size_t>(64, std::size_t(step * 4096));
      double h = step / double(n_sub);
      double th = s.theta, lr = s.log_rho;
      const double x_seg = x, t_seg = xr - bp[ip];
      auto deriv = [&](double xx, double thv, double& dth, double& dlr) {
        double tt = std::clamp((t_seg + (xx - x_seg)) / pc.width, 0.0, 1.0);
        double ee = pc.eps.eval(tt), mm = pc.mu.eval(tt);
        double sn = std::sin(thv), cs = std::cos(thv);
        dth = mm * cs * cs + E * ee * sn * sn;
        dlr = (mm - E * ee) * sn * cs;
      };
      for (std::size_t i = 0; i < n_sub; ++i) {
        double xi = x + double(i) * h;
        double k1t, k1r, k2t, k2r, k3t, k3r, k4t, k4r;
        deriv(xi, th, k1t, k1r);
        deriv(xi + 0.5 * h, th + 0.5 * h * k1t, k2t, k2r);
        deriv(xi + 0.5 * h, th + 0.5 * h * k2t, k3t, k3r);
        deriv(xi + h, th + h * k3t, k4t, k4r);
        th += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        lr += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
      }
      s.theta = th;
      s.log_rho = lr;
      s.theta_tilde = 0.5 * kPi - th;
    }
    x += step;
    (void)t;
  }
  return s;
}

struct StabilityBound {
  double value = 0.0;  // max(sup mu_d, E sup eps_d) (d2 - d1) at E = sup(gap)
  bool guaranteed = false;
};

// Sufficient smallness condition for an interface mode to survive the defect:
// value < pi/2 evaluated at the top of the common gap.
inline StabilityBound stability_bound(const DefectSpec& d, double gap_sup) {
  double se = 0.0, sm = 0.0;
  for (const auto& l : d.layers) {
    se = std::max(se, l.eps);
    sm = std::max(sm, l.mu);
  }
  StabilityBound b;
  b.value = std::max(sm, gap_sup * se) * d.width();
  b.guaranteed = b.value < 0.5 * kPi;
  return b;
}

struct CounterexampleResult {
  DefectSpec defect;
  double e1 = 0.0, e2 = 0.0;  // common gap used
  int band1 = 0, band2 = 0;
  double margin = 0.0;  // distance of theta_tilde_e(d2; E2) from {0, pi/2}
};

// Two-layer defect that removes the topologically protected interface mode:
// layer 1 with E1 eps - mu > 0 rotates the bracketing directions until their
// polar angles sum to pi, layer 2 with E1 eps - mu < 0 parks the upper
// direction at pi/2.  The junction must present gamma = +1 on the left and
// gamma = -1 on the right across a common gap.
inline CounterexampleResult build_counterexample(const MediumProfile& p1,
                                                 const MediumProfile& p2,
                                                 double e_max = 400.0) {
  if (!is_inversion_symmetric(p1) || !is_inversion_symmetric(p2))
    throw ValidationError("build_counterexample: both crystals must be inversion-symmetric");
  auto gaps = common_gaps(p1, p2, e_max);
  const CommonGap* chosen = nullptr;
  for (const auto& g : gaps) {
    try {
      if (bulk_index(p1, g.band1).gamma == 1.0 && bulk_index(p2, g.band2).gamma == -1.0) {
        chosen = &g;
        break;
      }
    } catch (const ValidationError&) {
      continue;
    }
  }
  if (chosen == nullptr)
    throw ValidationError(
        "build_counterexample: no common gap with gamma = +1 on the left and gamma = -1 on "
        "the right");
  double E1 = chosen->lo, E2 = chosen->hi;
  double eps1 = 2.0 / E1;          // E1 eps - mu = +1
  double eps2 = 0.5 / E1;          // E1 eps - mu = -1/2
  const double mu0 = 1.0;

  // theta_tilde is the polar angle of (psi, flux); advance via theta.
  auto advance = [&](double theta_tilde, double eps, double w, double E) {
    PruferState s;
    s.theta = 0.5 * kPi - theta_tilde;
    s = prufer_layer(eps, mu0, w, E, s);
    return 0.5 * kPi - s.theta;
  };

  const double tts0 = kPi;        // U_s = (-1, 0)
  const double tte0 = 0.5 * kPi;  // U_e = (0, 1)

  // Layer 1 width: angles sum to pi at E1.
  auto g1 = [&](double w) {
    return advance(tts0, eps1, w, E1) + advance(tte0, eps1, w, E1) - kPi;
  };
  double w_hi = 0.5;
  while (g1(w_hi) > 0.0) {
    w_hi *= 2.0;
    if (w_hi > 1e6) throw NumericalError("build_counterexample: layer-1 width search diverged");
  }
  double w1 = bisect(g1, 0.0, w_hi, 1e-14);

  // Layer 2 width: the lower direction reaches pi/2 at E1.
  double tts_mid = advance(tts0, eps1, w1, E1);
  auto g2 = [&](double w) { return advance(tts_mid, eps2, w, E1) - 0.5 * kPi; };
  w_hi = 0.5;
  while (g2(w_hi) > 0.0) {
    w_hi *= 2.0;
    if (w_hi > 1e6) throw NumericalError("build_counterexample: layer-2 width search diverged");
  }
  double w2 = bisect(g2, 0.0, w_hi, 1e-14);

  CounterexampleResult out;
  out.e1 = E1;
  out.e2 = E2;
  out.band1 = chosen->band1;
  out.band2 = chosen->band2;
  out.defect.d1 = -w1;
  out.defect.d2 = w2;
  out.defect.layers = {{w1, eps1, mu0}, {w2, eps2, mu0}};

  // The construction removes the mode only if the upper bracketing direction
  // stays inside quadrant I at the far edge of the gap.
  double tte_e2 = advance(advance(tte0, eps1, w1, E2), eps2, w2, E2);
  double tte_e1 = advance(advance(tte0, eps1, w1, E1), eps2, w2, E1);
  if (!(tte_e1 > 0.0 && tte_e1 < 0.5 * kPi))
    throw NumericalError("build_counterexample: bracketing direction left quadrant I at E1");
  if (!(tte_e2 > 0.0 && tte_e2 < 0.5 * kPi))
    throw ValidationError(
        "build_counterexample: gap is too wide for this construction (direction left "
        "quadrant I at E2)");
  out.margin = std::min(tte_e2, 0.5 * kPi - tte_e2);
  return out;
}

}  // namespace topoband
