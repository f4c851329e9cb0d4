#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "topoband/medium.hpp"
#include "topoband/numerics.hpp"
#include "topoband/propagator.hpp"

namespace topoband {

enum class EdgeKind { simple, touching };

struct BandEdge {
  double energy = 0.0;
  int d_sign = 0;       // +1 where D = +2, -1 where D = -2
  double k_star = 0.0;  // 0 for D = +2, pi for D = -2
  EdgeKind kind = EdgeKind::simple;
};

struct Band {
  int index = 0;  // 1-based
  double e_minus = 0.0, e_plus = 0.0;
  double k_minus = 0.0, k_plus = 0.0;  // quasimomentum attaining each edge
  EdgeKind lower_kind = EdgeKind::simple, upper_kind = EdgeKind::simple;
};

// Candidate band tangency that failed certification.
struct NearDegeneracy {
  double energy = 0.0;
  double d_residual = 0.0;       // |D -+ 2|
  double matrix_residual = 0.0;  // ||M -+ Id||
};

struct BandEdgeSet {
  std::vector<BandEdge> edges;  // increasing energy; E = 0 always present
  std::vector<Band> bands;      // complete bands below e_max
  std::vector<NearDegeneracy> near_degenerate;
  std::string warning;
  double e_max = 0.0;
};

inline double optical_length(const MediumProfile& p) {
  double L = 0.0;
  for (const auto& pc : p.pieces) {
    const int n = 33;
    auto w = simpson_weights(n, pc.width);
    for (int i = 0; i < n; ++i) {
      double t = double(i) / double(n - 1);
      L += w[size_t(i)] * std::sqrt(pc.eps.eval(t) * pc.mu.eval(t));
    }
  }
  return L;
}

namespace detail {

// Polished root of D(E) - target on a bracket given in s = sqrt(E).
template <typename DF>
double edge_bisect(DF&& D, double s_lo, double s_hi, double target) {
  auto g = [&](double s) { return D(s * s) - target; };
  double s = bisect(g, s_lo, s_hi, 3e-16);
  return s * s;
}

}  // namespace detail

// Scans the discriminant on a sqrt(E) grid (2000 cells per unit), locating
// simple band edges by sign change and band tangencies by extremum refinement.
// Tangencies are certified by |D -+ 2| <= 1e-8, |D'| <= 1e-6 and
// ||M -+ Id|| <= 1e-6; candidates failing that are reported as near-degenerate.
inline BandEdgeSet band_edges(const MediumProfile& p, double e_max) {
  if (e_max <= 0.0) throw ValidationError("band_edges: e_max must be positive");
  BandEdgeSet out;
  out.e_max = e_max;
  auto D = [&](double E) { return discriminant(p, E); };

  double s_max = std::sqrt(e_max);
  auto n = std::size_t(std::ceil(2000.0 * s_max));
  n = std::max<std::size_t>(n, 64);
  double h = s_max / double(n);
  std::vector<double> Ds(n + 1);
  for (std::size_t i = 0; i <= n; ++i) Ds[i] = D((h * double(i)) * (h * double(i)));

  // D(0) = 2 with D'(0) < 0: the lowest edge sits at E = 0 exactly.
  out.edges.push_back({0.0, +1, 0.0, EdgeKind::simple});

  auto add_edge = [&](double E, int sign, EdgeKind kind) {
    for (const auto& e : out.edges)
      if (std::abs(e.energy - E) <= 1e-10 * (1.0 + std::abs(E))) return;
    out.edges.push_back({E, sign, sign > 0 ? 0.0 : kPi, kind});
  };

  // Simple edges: sign changes of D -+ 2.
  for (int sign : {+1, -1}) {
    double target = 2.0 * sign;
    for (std::size_t i = 1; i <= n; ++i) {
      double g0 = Ds[i - 1] - target, g1 = Ds[i] - target;
      if (g0 == 0.0 && i > 1) add_edge((h * double(i - 1)) * (h * double(i - 1)), sign, EdgeKind::simple);
      if (g0 * g1 < 0.0)
        add_edge(detail::edge_bisect(D, h * double(i - 1), h * double(i), target), sign,
                 EdgeKind::simple);
    }
  }

  // Tangency candidates: interior extrema of D touching -+2.
  for (std::size_t i = 1; i + 1 <= n; ++i) {
    double prev = Ds[i - 1], cur = Ds[i], next = Ds[i + 1];
    bool local_max = cur > prev && cur >= next && std::abs(cur - 2.0) < 0.5;
    bool local_min = cur < prev && cur <= next && std::abs(cur + 2.0) < 0.5;
    if (!local_max && !local_min) continue;
    int sign = local_max ? +1 : -1;
    double target = 2.0 * sign;
    double s_lo = h * double(i - 1), s_hi = h * double(i + 1);
    double s_c = golden_min([&](double s) { return -sign * D(s * s); }, s_lo, s_hi, 1e-12);
    double Ec = s_c * s_c;
    double g_ext = D(Ec) - target;
    if (std::abs(g_ext) <= 1e-8) {
      double dp = discriminant_dE(p, Ec);
      auto M = monodromy_matrix<double>(p, Ec);
      Mat2<double> ref = Mat2<double>::identity() * double(sign);
      double mres = mat_norm_inf(M - ref);
      if (std::abs(dp) <= 1e-6 && mres <= 1e-6) {
        add_edge(Ec, sign, EdgeKind::touching);
        continue;
      }
      out.near_degenerate.push_back({Ec, std::abs(g_ext), mres});
    }
    if (sign * g_ext > 0.0) {
      // The extremum overshoots the target but is not a certified tangency: a
      // narrow open gap the coarse sign scan missed (possibly hair-thin).
      // Both flanks cross the target.
      double gl = D(s_lo * s_lo) - target, gc = g_ext;
      if (gl * gc < 0.0) add_edge(detail::edge_bisect(D, s_lo, s_c, target), sign, EdgeKind::simple);
      double gr = D(s_hi * s_hi) - target;
      if (gc * gr < 0.0) add_edge(detail::edge_bisect(D, s_c, s_hi, target), sign, EdgeKind::simple);
    }
    // Extremum short of the target without certification: band interior.
  }

  std::sort(out.edges.begin(), out.edges.end(),
            [](const BandEdge& a, const BandEdge& b) { return a.energy < b.energy; });

  // Pair edges into bands: gap partners share the same D sign; a touching
  // edge closes one band and opens the next.
  std::size_t idx = 0;
  const BandEdge* lower = &out.edges[idx++];
  if (lower->energy != 0.0 || lower->d_sign != +1)
    throw NumericalError("band_edges: lowest edge must sit at E = 0 with D = +2");
  while (idx < out.edges.size()) {
    const BandEdge& upper = out.edges[idx];
    Band b;
    b.index = int(out.bands.size()) + 1;
    b.e_minus = lower->energy;
    b.e_plus = upper.energy;
    b.k_minus = lower->k_star;
    b.k_plus = upper.k_star;
    b.lower_kind = lower->kind;
    b.upper_kind = upper.kind;
    if (lower->d_sign == upper.d_sign)
      throw NumericalError("band_edges: consecutive band edges carry the same discriminant sign");
    out.bands.push_back(b);
    if (upper.kind == EdgeKind::touching) {
      lower = &out.edges[idx];
      idx += 1;
    } else {
      if (idx + 1 >= out.edges.size()) {
        idx += 1;  // gap partner above e_max: done
        lower = nullptr;
        break;
      }
      const BandEdge& partner = out.edges[idx + 1];
      if (partner.d_sign != upper.d_sign)
        throw NumericalError("band_edges: gap partner edges carry different discriminant signs");
      lower = &partner;
      idx += 2;
    }
  }
  if (out.bands.empty())
    out.warning = "no complete band below e_max; raise e_max";
  else if (lower != nullptr)
    out.warning = "band " + std::to_string(out.bands.size() + 1) + " is truncated at e_max";
  return out;
}

// band_edges with e_max grown until at least `min_bands` complete bands exist.
inline BandEdgeSet band_edges_for(const MediumProfile& p, std::size_t min_bands) {
  double L = optical_length(p);
  double e = std::pow((double(min_bands) + 1.0) * kPi / L, 2.0) * 1.5 + 20.0;
  for (int round = 0; round < 24; ++round) {
    auto set = band_edges(p, e);
    if (set.bands.size() >= min_bands) return set;
    e *= 2.0;
  }
  throw NumericalError("band_edges_for: requested band not found below the energy cap");
}

struct DispersionPoint {
  double k = 0.0, energy = 0.0;
  double residual = 0.0;  // |D(E(k)) - 2 cos k|
};

struct Dispersion {
  int band = 0;
  std::vector<DispersionPoint> points;  // k ascending over [0, pi]
};

namespace detail {

// E in [e_lo, e_hi] with D(E) = target; D is strictly monotone across a band.
template <typename DF>
double band_energy(DF&& D, double e_lo, double e_hi, double target, double ftol = 1e-10) {
  auto g = [&](double E) { return D(E) - target; };
  double glo = g(e_lo), ghi = g(e_hi);
  if (glo * ghi > 0.0) {
    // Edge certification leaves |D -+ 2| slightly off zero; nudge inward.
    double pad = (e_hi - e_lo) * 1e-9;
    e_lo += pad;
    e_hi -= pad;
    glo = g(e_lo);
    ghi = g(e_hi);
    if (glo * ghi > 0.0) return std::abs(glo) < std::abs(ghi) ? e_lo : e_hi;
  }
  return bisect(g, e_lo, e_hi, glo, ghi, 1e-15, ftol);
}

}  // namespace detail

// E_j(k) on a uniform k grid over [0, pi] (endpoints included).
inline Dispersion dispersion(const MediumProfile& p, int band_index, std::size_t n_k = 128) {
  if (band_index < 1) throw ValidationError("dispersion: band index is 1-based");
  if (n_k < 2) throw ValidationError("dispersion: need at least two k samples");
  auto set = band_edges_for(p, std::size_t(band_index));
  const Band& b = set.bands[std::size_t(band_index) - 1];
  auto D = [&](double E) { return discriminant(p, E); };
  Dispersion out;
  out.band = band_index;
  for (std::size_t i = 0; i < n_k; ++i) {
    double k = (i + 1 == n_k) ? kPi : kPi * double(i) / double(n_k - 1);
    DispersionPoint pt;
    pt.k = k;
    if (i == 0 || i + 1 == n_k) {
      // Pick the edge attained at this endpoint by k-halves, not by float
      // equality: the grid value may sit one ulp off pi.
      bool lower_here = (i == 0) == (b.k_minus < 0.5 * kPi);
      pt.energy = lower_here ? b.e_minus : b.e_plus;
    } else {
      pt.energy = detail::band_energy(D, b.e_minus, b.e_plus, 2.0 * std::cos(k));
    }
    pt.residual = std::abs(D(pt.energy) - 2.0 * std::cos(k));
    out.points.push_back(pt);
  }
  return out;
}

struct DiracPoint {
  double k_star = 0.0;
  double e_star = 0.0;
  int lower_band = 0;  // touches the upper edge of this band (1-based)
  int sigma = 0;       // M(E*) = sigma Id
  double d2 = 0.0;     // D''(E*)
  double slope = 0.0;  // sqrt(2 / |D''|): linear dispersion coefficient
  double matrix_residual = 0.0;
};

struct DiracScan {
  std::vector<DiracPoint> points;
  std::vector<NearDegeneracy> rejected;
};

// Band tangencies below e_max, certified as conical crossings.
inline DiracScan find_dirac_points(const MediumProfile& p, double e_max) {
  auto set = band_edges(p, e_max);
  DiracScan out;
  out.rejected = set.near_degenerate;
  for (const auto& b : set.bands) {
    if (b.upper_kind != EdgeKind::touching) continue;
    DiracPoint dp;
    dp.k_star = b.k_plus;
    dp.e_star = b.e_plus;
    dp.lower_band = b.index;
    dp.sigma = b.k_plus == 0.0 ? +1 : -1;
    auto M = monodromy_matrix<double>(p, dp.e_star);
    dp.matrix_residual = mat_norm_inf(M - Mat2<double>::identity() * double(dp.sigma));
    dp.d2 = discriminant_d2E(p, dp.e_star);
    if (double(dp.sigma) * dp.d2 >= 0.0)
      throw NumericalError("find_dirac_points: D'' carries the wrong sign at a tangency");
    dp.slope = std::sqrt(2.0 / std::abs(dp.d2));
    out.points.push_back(dp);
  }
  return out;
}

// Relative mismatch between the analytic dispersion slope at a Dirac point and
// a Richardson-extrapolated numerical slope from the upper band.
inline double dirac_slope_check(const MediumProfile& p, const DiracPoint& dp) {
  auto set = band_edges_for(p, std::size_t(dp.lower_band) + 1);
  const Band& upper = set.bands[std::size_t(dp.lower_band)];
  auto D = [&](double E) { return discriminant(p, E); };
  auto upper_energy = [&](double dk) {
    double k = dp.k_star == 0.0 ? dk : kPi - dk;
    return detail::band_energy(D, upper.e_minus, upper.e_plus, 2.0 * std::cos(k), 1e-12);
  };
  auto slope_at = [&](double dk) { return (upper_energy(dk) - dp.e_star) / dk; };
  double s1 = slope_at(5e-3), s2 = slope_at(1e-2);
  double num = 2.0 * s1 - s2;
  return std::abs(num - dp.slope) / dp.slope;
}

// Eigenvalue lists of the four classical boundary condition problems on one
// period: periodic (D = 2), semi-periodic (D = -2), Dirichlet (psi(0) =
// psi(1) = 0), Neumann (flux(0) = flux(1) = 0).  Periodic/semi-periodic
// tangencies enter twice.
struct BcEigenvalues {
  std::vector<double> periodic, semiperiodic, dirichlet, neumann;
};

namespace detail {

inline void check_interlacing(const BcEigenvalues& bc);

}  // namespace detail

inline BcEigenvalues bc_eigenvalues(const MediumProfile& p, std::size_t count) {
  if (count == 0) throw ValidationError("bc_eigenvalues: count must be positive");
  double L = optical_length(p);
  double e_hi = std::pow((double(count) + 2.0) * kPi / L, 2.0) * 1.5 + 20.0;
  BcEigenvalues bc;
  for (int round = 0;; ++round) {
    bc = BcEigenvalues{};
    auto set = band_edges(p, e_hi);
    for (const auto& e : set.edges) {
      auto& list = e.d_sign > 0 ? bc.periodic : bc.semiperiodic;
      list.push_back(e.energy);
      if (e.kind == EdgeKind::touching) list.push_back(e.energy);
    }

    double s_max = std::sqrt(e_hi);
    auto n = std::size_t(std::ceil(2000.0 * s_max));
    double h = s_max / double(n);
    double m12_prev = 0.0, m21_prev = 0.0;
    bc.neumann.push_back(0.0);  // flux of the constant solution vanishes identically
    for (std::size_t i = 0; i <= n; ++i) {
      double E = (h * double(i)) * (h * double(i));
      auto M = monodromy_matrix<double>(p, E);
      if (i > 0) {
        double s_lo = h * double(i - 1), s_hi = h * double(i);
        if (m12_prev * M.a12 < 0.0) {
          auto f = [&](double s) { return monodromy_matrix<double>(p, s * s).a12; };
          double s = bisect(f, s_lo, s_hi, 3e-16);
          bc.dirichlet.push_back(s * s);
        }
        if (i > 1 && m21_prev * M.a21 < 0.0) {
          auto f = [&](double s) { return monodromy_matrix<double>(p, s * s).a21; };
          double s = bisect(f, s_lo, s_hi, 3e-16);
          bc.neumann.push_back(s * s);
        }
      }
      m12_prev = M.a12;
      m21_prev = M.a21;
    }

    if (bc.periodic.size() >= count && bc.semiperiodic.size() >= count &&
        bc.dirichlet.size() >= count && bc.neumann.size() >= count)
      break;
    if (round >= 16) throw NumericalError("bc_eigenvalues: eigenvalue count not reached");
    e_hi *= 2.0;
  }
  for (auto* list : {&bc.periodic, &bc.semiperiodic, &bc.dirichlet, &bc.neumann}) {
    std::sort(list->begin(), list->end());
    list->resize(count);
  }
  detail::check_interlacing(bc);
  return bc;
}

namespace detail {

// E1N <= E1P < E1S <= {E2N, E1D} <= E2S < E2P <= {E3N, E2D} <= E3P < E3S <= ...
// with slack 1e-8 (1 + |E|) on every comparison.
inline void check_interlacing(const BcEigenvalues& bc) {
  auto le = [](double a, double b) { return a <= b + 1e-8 * (1.0 + std::abs(b)); };
  auto fail = [](const std::string& what) {
    throw NumericalError("bc_eigenvalues: interlacing violated at " + what);
  };
  const auto &P = bc.periodic, &S = bc.semiperiodic, &Dir = bc.dirichlet, &N = bc.neumann;
  if (!N.empty() && !P.empty() && !le(N[0], P[0])) fail("E1N <= E1P");
  std::size_t m_count = std::min(P.size(), S.size());
  for (std::size_t m = 1; m <= m_count; ++m) {
    double first = (m % 2 == 1) ? P[m - 1] : S[m - 1];
    double second = (m % 2 == 1) ? S[m - 1] : P[m - 1];
    if (!le(first, second)) fail("island " + std::to_string(m));
    bool have_next = (m % 2 == 1) ? S.size() > m : P.size() > m;
    double next = have_next ? ((m % 2 == 1) ? S[m] : P[m]) : 0.0;
    if (N.size() > m) {
      if (!le(second, N[m])) fail("gap floor vs N" + std::to_string(m + 1));
      if (have_next && !le(N[m], next)) fail("N" + std::to_string(m + 1) + " vs gap ceiling");
    }
    if (Dir.size() >= m) {
      if (!le(second, Dir[m - 1])) fail("gap floor vs D" + std::to_string(m));
      if (have_next && !le(Dir[m - 1], next)) fail("D" + std::to_string(m) + " vs gap ceiling");
    }
  }
}

}  // namespace detail

}  // namespace topoband
