#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "topoband/interface.hpp"
#include "topoband/medium.hpp"
#include "topoband/propagator.hpp"
#include "topoband/spectrum.hpp"

namespace topoband {

// Quadrature data for second-order analysis around a Dirac point: the
// fundamental columns (u1, v1; u2, v2 their fluxes) and both coefficient
// families sampled on a Simpson mesh whose cells never straddle a
// discontinuity of the perturbation shape.
struct DiracContext {
  MediumProfile p;
  PerturbationProfile q;
  DiracPoint dp;
  double sigma = 1.0;
  std::vector<double> x, w;
  std::vector<double> u1, v1, u2, v2;
  std::vector<double> eps, mu;      // crystal coefficients, one-sided
  std::vector<double> eps_t, mu_t;  // perturbation shapes on the same nodes
};

namespace detail {

// Piecewise evaluation of a perturbation shape; `cell_mid` selects the piece
// so one-sided values stay attached to their side of a discontinuity.
inline std::pair<std::size_t, double> locate_in(const std::vector<Piece>& pieces, double x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    double next = acc + pieces[i].width;
    if (x < next || i + 1 == pieces.size())
      return {i, std::clamp((x - acc) / pieces[i].width, 0.0, 1.0)};
    acc = next;
  }
  return {0, 0.0};
}

inline std::vector<double> perturbation_cuts(const PerturbationProfile& q) {
  std::vector<double> cuts{0.0};
  double acc = 0.0;
  for (const auto& pc : q.pieces) {
    acc += pc.width;
    cuts.push_back(std::min(acc, 1.0));
  }
  return cuts;
}

}  // namespace detail

inline DiracContext dirac_context(const MediumProfile& p, const PerturbationProfile& q,
                                  const DiracPoint& dp) {
  DiracContext ctx;
  ctx.p = p;
  ctx.q = q;
  ctx.dp = dp;
  ctx.sigma = dp.sigma;

  auto mesh = build_mesh(p, dp.e_star, detail::perturbation_cuts(q));
  if (mat_norm_inf(mesh.m - Mat2<double>::identity() * ctx.sigma) > 1e-6)
    throw NumericalError("dirac_context: monodromy is not sigma * Id at the given energy");

  ctx.x = mesh.x;
  ctx.w = mesh.w;
  ctx.eps = mesh.eps;
  ctx.mu = mesh.mu;
  ctx.u1.resize(mesh.x.size());
  ctx.v1.resize(mesh.x.size());
  ctx.u2.resize(mesh.x.size());
  ctx.v2.resize(mesh.x.size());
  ctx.eps_t.assign(mesh.x.size(), 0.0);
  ctx.mu_t.assign(mesh.x.size(), 0.0);
  for (std::size_t i = 0; i < mesh.x.size(); ++i) {
    ctx.u1[i] = mesh.psi[i].a11;
    ctx.v1[i] = mesh.psi[i].a12;
    ctx.u2[i] = mesh.psi[i].a21;
    ctx.v2[i] = mesh.psi[i].a22;
  }
  if (!q.is_zero()) {
    double q_total = 0.0;
    for (const auto& pc : q.pieces) q_total += pc.width;
    for (auto [b, e] : mesh.piece_ranges) {
      double mid = 0.5 * (mesh.x[b] + mesh.x[e - 1]);
      auto [iq, tmid] = detail::locate_in(q.pieces, std::min(mid, q_total));
      (void)tmid;
      const Piece& pc = q.pieces[iq];
      double start = 0.0;
      for (std::size_t j = 0; j < iq; ++j) start += q.pieces[j].width;
      for (std::size_t i = b; i < e; ++i) {
        double t = std::clamp((mesh.x[i] - start) / pc.width, 0.0, 1.0);
        ctx.eps_t[i] = pc.eps.eval(t);
        ctx.mu_t[i] = pc.mu.eval(t);
      }
    }
  }
  return ctx;
}

// Second-order coefficients of sigma * D(E, delta) around (E*, 0):
// a1 dE^2 + 2 a2 dE ddelta + a3 ddelta^2 enters as D = 2 + (1/2)(...).
// Each value is cross-checked against finite differences of the assembled
// perturbed discriminant; disagreement is a hard error.
struct HessianCoeffs {
  double sigma = 1.0;
  double p1 = 0, q1 = 0, r1 = 0;
  double p2 = 0, q2 = 0, r2 = 0;
  double a1 = 0, a2 = 0, a3 = 0;
  double beta1 = 0, beta2 = 0;      // p1, q1
  double beta1_t = 0, beta2_t = 0;  // p2, q2
  double fd_a1 = 0, fd_a2 = 0, fd_a3 = 0;
};

inline HessianCoeffs hessian_coeffs(const DiracContext& ctx) {
  HessianCoeffs h;
  h.sigma = ctx.sigma;
  const double E = ctx.dp.e_star;
  for (std::size_t i = 0; i < ctx.x.size(); ++i) {
    double wi = ctx.w[i];
    h.p1 += wi * ctx.eps[i] * ctx.u1[i] * ctx.v1[i];
    h.q1 += wi * ctx.eps[i] * ctx.v1[i] * ctx.v1[i];
    h.r1 += wi * ctx.eps[i] * ctx.u1[i] * ctx.u1[i];
    h.p2 += wi * (E * ctx.eps_t[i] * ctx.u1[i] * ctx.v1[i] + ctx.mu_t[i] * ctx.u2[i] * ctx.v2[i]);
    h.q2 += wi * (E * ctx.eps_t[i] * ctx.v1[i] * ctx.v1[i] + ctx.mu_t[i] * ctx.v2[i] * ctx.v2[i]);
    h.r2 += wi * (E * ctx.eps_t[i] * ctx.u1[i] * ctx.u1[i] + ctx.mu_t[i] * ctx.u2[i] * ctx.u2[i]);
  }
  h.a1 = 2.0 * (h.p1 * h.p1 - h.q1 * h.r1);
  h.a2 = 2.0 * h.p1 * h.p2 - h.q1 * h.r2 - h.r1 * h.q2;
  h.a3 = 2.0 * (h.p2 * h.p2 - h.q2 * h.r2);
  h.beta1 = h.p1;
  h.beta2 = h.q1;
  h.beta1_t = h.p2;
  h.beta2_t = h.q2;

  // Finite-difference Hessian of sigma * D(E, delta).
  const double hE = 1e-4 * (1.0 + std::abs(E));
  const double hd = 1e-4;
  auto dhat = [&](double e, double delta) {
    if (delta == 0.0) return ctx.sigma * discriminant(ctx.p, e);
    return ctx.sigma * discriminant(apply_perturbation(ctx.p, ctx.q, delta), e);
  };
  double c00 = dhat(E, 0.0);
  h.fd_a1 = (dhat(E + hE, 0.0) - 2.0 * c00 + dhat(E - hE, 0.0)) / (hE * hE);
  h.fd_a3 = (dhat(E, hd) - 2.0 * c00 + dhat(E, -hd)) / (hd * hd);
  h.fd_a2 = (dhat(E + hE, hd) - dhat(E + hE, -hd) - dhat(E - hE, hd) + dhat(E - hE, -hd)) /
            (4.0 * hE * hd);

  double floor_tol = 1e-5 * (std::abs(h.a1) + std::abs(h.a3));
  auto agree = [&](double a, double fd) {
    return std::abs(a - fd) <= 1e-3 * std::max(std::abs(a), std::abs(fd)) + floor_tol;
  };
  if (!agree(h.a1, h.fd_a1) || !agree(h.a2, h.fd_a2) || !agree(h.a3, h.fd_a3))
    throw NumericalError(
        "hessian_coeffs: quadrature coefficients disagree with the finite-difference "
        "Hessian of the discriminant");
  return h;
}

inline HessianCoeffs hessian_coeffs(const MediumProfile& p, const PerturbationProfile& q,
                                    const DiracPoint& dp) {
  return hessian_coeffs(dirac_context(p, q, dp));
}

struct Assumption1 {
  bool satisfied = false;
  int branch = 0;  // 1: p2 >= 0 and p2^2 > q2 r2;  2: p2 < 0 and p2^2 > 2 q2 r2
  double p2 = 0, q2 = 0, r2 = 0;
};

inline Assumption1 check_assumption1(const HessianCoeffs& h) {
  Assumption1 a;
  a.p2 = h.p2;
  a.q2 = h.q2;
  a.r2 = h.r2;
  if (h.p2 >= 0.0 && h.p2 * h.p2 > h.q2 * h.r2) {
    a.satisfied = true;
    a.branch = 1;
  } else if (h.p2 < 0.0 && h.p2 * h.p2 > 2.0 * h.q2 * h.r2) {
    a.satisfied = true;
    a.branch = 2;
  }
  if (h.p2 == 0.0 && h.q2 == 0.0 && h.r2 == 0.0) a.satisfied = false;
  return a;
}

// First-order gap opened by the perturbation: edges E* + eta delta with
// eta = (-a2 -+ sqrt(a2^2 - a1 a3)) / a1.  Since a1 < 0, eta_minus < eta_plus
// whenever the discriminant of the quadratic is positive.
struct GapPrediction {
  double e_star = 0.0;
  double sigma = 1.0;
  double eta_minus = 0.0, eta_plus = 0.0;

  std::pair<double, double> edges(double delta) const {
    double a = e_star + eta_minus * delta, b = e_star + eta_plus * delta;
    return {std::min(a, b), std::max(a, b)};
  }
};

inline GapPrediction gap_prediction(const DiracContext& ctx, const HessianCoeffs& h) {
  double disc = h.a2 * h.a2 - h.a1 * h.a3;
  if (!(disc > 0.0))
    throw ValidationError("gap_prediction: the perturbation does not open a gap at first order");
  if (!(h.a1 < 0.0))
    throw NumericalError("gap_prediction: band-side coefficient a1 is not negative");
  double s = std::sqrt(disc);
  GapPrediction g;
  g.e_star = ctx.dp.e_star;
  g.sigma = ctx.sigma;
  g.eta_minus = (-h.a2 + s) / h.a1;
  g.eta_plus = (-h.a2 - s) / h.a1;
  return g;
}

inline GapPrediction gap_prediction(const MediumProfile& p, const PerturbationProfile& q,
                                    const DiracPoint& dp) {
  auto ctx = dirac_context(p, q, dp);
  return gap_prediction(ctx, hessian_coeffs(ctx));
}

// Impedance of the crystal perturbed by delta * q, at an energy inside the
// opened gap.
inline double perturbed_impedance(const MediumProfile& p, const PerturbationProfile& q,
                                  double delta, Side side, double E) {
  return impedance(apply_perturbation(p, q, delta), side, E);
}

struct DiracModeResult {
  InterfaceMode mode;
  GapPrediction prediction;
  HessianCoeffs coeffs;
  Assumption1 assumption;
  double delta = 0.0;
  double predicted_lo = 0.0, predicted_hi = 0.0;  // prediction.edges(delta)
};

// Interface mode of the junction (p - delta q | p + delta q) near a Dirac
// point, located by bisecting the impedance mismatch
// xi_right(E; +delta) - xi_left(E; -delta) inside the predicted gap.  This
// route is independent of the matching-determinant search, so agreement
// between the two is a real consistency check.
inline DiracModeResult dirac_interface_mode(const MediumProfile& p, const PerturbationProfile& q,
                                            double delta, const DiracPoint& dp) {
  if (!(delta > 0.0)) throw ValidationError("dirac_interface_mode: delta must be positive");
  auto ctx = dirac_context(p, q, dp);
  auto h = hessian_coeffs(ctx);
  DiracModeResult out;
  out.coeffs = h;
  out.assumption = check_assumption1(h);
  out.prediction = gap_prediction(ctx, h);
  out.delta = delta;
  auto [plo, phi] = out.prediction.edges(delta);
  out.predicted_lo = plo;
  out.predicted_hi = phi;

  MediumProfile right = apply_perturbation(p, q, delta);
  MediumProfile left = apply_perturbation(p, q, -delta);

  // Predicted common gap is symmetric: +/- 0.9 min(eta_plus, -eta_minus) delta.
  double qmin = std::min(out.prediction.eta_plus, -out.prediction.eta_minus);
  double lo = dp.e_star - 0.9 * qmin * delta;
  double hi = dp.e_star + 0.9 * qmin * delta;
  {
    // Trim to the numerically certified common gap in case first order is off.
    auto gaps = common_gaps(left, right, dp.e_star + 10.0 * out.prediction.eta_plus * delta);
    for (const auto& g : gaps)
      if (g.lo < dp.e_star && dp.e_star < g.hi) {
        double inset = 0.05 * (g.hi - g.lo);
        lo = std::max(lo, g.lo + inset);
        hi = std::min(hi, g.hi - inset);
        break;
      }
  }
  if (!(lo < hi))
    throw NumericalError("dirac_interface_mode: no usable energy window inside the opened gap");

  auto mismatch = [&](double E) {
    return impedance(right, Side::right, E) - impedance(left, Side::left, E);
  };
  const std::size_t n = 129;
  const double xi_cap = 1e6;  // skip impedance poles
  double e_prev = 0.0, g_prev = 0.0;
  bool have_prev = false;
  std::optional<double> root;
  for (std::size_t i = 0; i < n && !root; ++i) {
    double E = lo + (hi - lo) * double(i) / double(n - 1);
    double xr = impedance(right, Side::right, E);
    double xl = impedance(left, Side::left, E);
    if (std::abs(xr) > xi_cap || std::abs(xl) > xi_cap) {
      have_prev = false;
      continue;
    }
    double g = xr - xl;
    if (have_prev && g_prev * g < 0.0) {
      double r = bisect(mismatch, e_prev, E, g_prev, g, 1e-14);
      auto trial = assemble_interface_mode(left, right, DefectSpec{}, r);
      if (trial.residual < 1e-6) {
        root = r;
        out.mode = std::move(trial);
      }
    }
    e_prev = E;
    g_prev = g;
    have_prev = true;
  }
  if (!root)
    throw NumericalError("dirac_interface_mode: no impedance crossing found in the opened gap");
  return out;
}

// Convenience overload: use the lowest Dirac point below e_max.
inline DiracModeResult dirac_interface_mode(const MediumProfile& p, const PerturbationProfile& q,
                                            double delta, double e_max = 400.0) {
  auto scan = find_dirac_points(p, e_max);
  if (scan.points.empty())
    throw ValidationError("dirac_interface_mode: the crystal has no Dirac point below e_max");
  return dirac_interface_mode(p, q, delta, scan.points.front());
}

}  // namespace topoband
