#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "topoband/medium.hpp"
#include "topoband/numerics.hpp"
#include "topoband/propagator.hpp"
#include "topoband/spectrum.hpp"

namespace topoband {

// Bloch mode phi_{j,k} sampled over one period, normalized to unit X-norm
// (f,g)_X = integral eps f conj(g).  Nodes are packed piece by piece: shared
// piece boundaries appear once per adjacent piece, each carrying its one-sided
// eps in `w_eps` (Simpson weight times eps), so X inner products are plain
// weighted sums.
struct BlochMode {
  int band = 0;
  double k = 0.0;
  double energy = 0.0;
  std::vector<double> x;
  std::vector<cplx> psi;   // phi
  std::vector<cplx> flux;  // phi' / mu
  std::vector<cplx> u;     // periodic part, u = phi e^{-ikx}
  std::vector<double> w_eps;
  bool degenerate_gauge = false;
  double eigen_residual = 0.0;
};

namespace detail {

struct SampleGrid {
  std::vector<double> x;
  std::vector<double> w_eps;
  std::vector<std::pair<std::size_t, std::size_t>> piece_ranges;
};

inline SampleGrid make_sample_grid(const MediumProfile& p, std::size_t resolution) {
  SampleGrid g;
  auto bp = p.breakpoints();
  for (std::size_t i = 0; i < p.pieces.size(); ++i) {
    const Piece& pc = p.pieces[i];
    auto n_int = std::size_t(std::ceil(double(resolution) * pc.width));
    n_int = std::max<std::size_t>(n_int, 32);
    if (n_int % 2 == 1) ++n_int;
    auto wts = simpson_weights(n_int + 1, pc.width);
    std::size_t begin = g.x.size();
    for (std::size_t kn = 0; kn <= n_int; ++kn) {
      double t = double(kn) / double(n_int);
      g.x.push_back(bp[i] + pc.width * t);
      g.w_eps.push_back(wts[kn] * pc.eps.eval(t));
    }
    g.piece_ranges.push_back({begin, g.x.size()});
  }
  return g;
}

// Fundamental solution sampled on the grid.
inline std::vector<Mat2<double>> psi_on_grid(const MediumProfile& p, double E,
                                             const SampleGrid& g) {
  std::vector<Mat2<double>> out(g.x.size());
  Mat2<double> Psi = Mat2<double>::identity();
  auto bp = p.breakpoints();
  for (std::size_t i = 0; i < g.piece_ranges.size(); ++i) {
    auto [b, e] = g.piece_ranges[i];
    const Piece& pc = p.pieces[i];
    for (std::size_t n = b; n < e; ++n) {
      if (n > b) {
        double t0 = (g.x[n - 1] - bp[i]) / pc.width;
        double t1 = (g.x[n] - bp[i]) / pc.width;
        Psi = piece_transfer(pc, E, std::clamp(t0, 0.0, 1.0), std::clamp(t1, 0.0, 1.0)) * Psi;
      }
      out[n] = Psi;
    }
  }
  return out;
}

inline BlochMode assemble_mode(const MediumProfile& p, int band, double k, double E,
                               const SampleGrid& g) {
  BlochMode m;
  m.band = band;
  m.k = k;
  m.energy = E;
  m.x = g.x;
  m.w_eps = g.w_eps;

  double k_abs = std::abs(k);
  auto M = monodromy_matrix<double>(p, E);
  cplx lam = std::polar(1.0, k_abs);
  double tol = 1e-8 * (1.0 + std::abs(E));
  cplx c1, c2;
  if (std::abs(M.a12) <= tol && std::abs(lam - M.a11) <= tol) {
    // Both natural coefficients vanish (Dirichlet-type band edge): gauge the
    // mode as i psi_2, the limit of the generic formula from inside the band.
    m.degenerate_gauge = true;
    c1 = 0.0;
    c2 = cplx(0.0, 1.0);
  } else {
    c1 = M.a12;
    c2 = lam - M.a11;
  }

  auto psis = psi_on_grid(p, E, g);
  m.psi.resize(g.x.size());
  m.flux.resize(g.x.size());
  m.u.resize(g.x.size());
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    m.psi[i] = c1 * psis[i].a11 + c2 * psis[i].a12;
    m.flux[i] = c1 * psis[i].a21 + c2 * psis[i].a22;
  }
  double nrm2 = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) nrm2 += g.w_eps[i] * std::norm(m.psi[i]);
  double scale = 1.0 / std::sqrt(nrm2);
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    m.psi[i] *= scale;
    m.flux[i] *= scale;
    m.u[i] = m.psi[i] * std::polar(1.0, -k_abs * g.x[i]);
  }

  Vec2<cplx> u0{m.psi.front(), m.flux.front()};
  Vec2<cplx> r{M.a11 * u0.x + M.a12 * u0.y - lam * u0.x, M.a21 * u0.x + M.a22 * u0.y - lam * u0.y};
  m.eigen_residual = vec_norm(r) / vec_norm(u0);

  if (k < 0.0) {
    for (auto& v : m.psi) v = std::conj(v);
    for (auto& v : m.flux) v = std::conj(v);
    for (auto& v : m.u) v = std::conj(v);
  }
  return m;
}

inline double band_edge_energy(const Band& b, double k_star) {
  if (b.k_minus == k_star) return b.e_minus;
  return b.e_plus;
}

}  // namespace detail

// phi_{j,k} for k in [-pi, pi].  Modes at -k are the complex conjugates of
// modes at +k.
inline BlochMode bloch_mode(const MediumProfile& p, int band_index, double k,
                            std::size_t resolution = 2048) {
  if (band_index < 1) throw ValidationError("bloch_mode: band index is 1-based");
  if (k < -kPi - 1e-12 || k > kPi + 1e-12)
    throw ValidationError("bloch_mode: k must lie in [-pi, pi]");
  k = std::clamp(k, -kPi, kPi);
  auto set = band_edges_for(p, std::size_t(band_index));
  const Band& b = set.bands[std::size_t(band_index) - 1];
  double k_abs = std::abs(k);
  double E;
  if (k_abs < 1e-14 || k_abs > kPi - 1e-14) {
    E = detail::band_edge_energy(b, k_abs < 1e-14 ? 0.0 : kPi);
  } else {
    auto D = [&](double e) { return discriminant(p, e); };
    E = detail::band_energy(D, b.e_minus, b.e_plus, 2.0 * std::cos(k_abs));
  }
  auto grid = detail::make_sample_grid(p, resolution);
  return detail::assemble_mode(p, band_index, k, E, grid);
}

enum class Parity { even, odd };

struct ParityLabel {
  Parity parity = Parity::even;
  double witness = 0.0;  // reflection residual of the edge mode, relative
};

// Parity of the band-edge Bloch mode of an inversion-symmetric crystal at
// edge_k in {0, pi}.  Even modes are Neumann eigenfunctions (M21 = 0), odd
// modes Dirichlet eigenfunctions (M12 = 0); the matrix test is cross-checked
// against the reflection symmetry psi(1 - x) = s sigma psi(x) of the sampled
// mode.
inline ParityLabel edge_parity(const MediumProfile& p, int band_index, double edge_k,
                               std::size_t resolution = 2048) {
  if (!is_inversion_symmetric(p))
    throw ValidationError("edge_parity: crystal is not inversion-symmetric");
  bool at_zero = std::abs(edge_k) < 1e-9;
  if (!at_zero && std::abs(edge_k - kPi) > 1e-9)
    throw ValidationError("edge_parity: edge_k must be 0 or pi");
  double k_star = at_zero ? 0.0 : kPi;
  auto set = band_edges_for(p, std::size_t(band_index));
  const Band& b = set.bands[std::size_t(band_index) - 1];
  EdgeKind kind = (b.k_minus == k_star) ? b.lower_kind : b.upper_kind;
  if (kind == EdgeKind::touching)
    throw ValidationError("edge_parity: band edge is a Dirac point (multiplicity two)");
  double E = detail::band_edge_energy(b, k_star);

  auto M = monodromy_matrix<double>(p, E);
  double scale = mat_norm_inf(M);
  bool neumann_like = std::abs(M.a21) <= 1e-6 * scale;   // mode ~ psi_1, even
  bool dirichlet_like = std::abs(M.a12) <= 1e-6 * scale; // mode ~ psi_2, odd
  if (neumann_like && dirichlet_like)
    throw ValidationError("edge_parity: monodromy is a multiple of the identity (Dirac point)");
  if (!neumann_like && !dirichlet_like)
    throw NumericalError("edge_parity: no monodromy column qualifies as the edge mode");
  Parity parity = neumann_like ? Parity::even : Parity::odd;

  auto grid = detail::make_sample_grid(p, resolution);
  auto psis = detail::psi_on_grid(p, E, grid);
  std::size_t n = grid.x.size();
  std::vector<double> mode(n);
  for (std::size_t i = 0; i < n; ++i)
    mode[i] = parity == Parity::even ? psis[i].a11 : psis[i].a12;
  double sigma = at_zero ? 1.0 : -1.0;
  double amp = 0.0;
  for (double v : mode) amp = std::max(amp, std::abs(v));
  auto reflect_residual = [&](double s) {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      r = std::max(r, std::abs(mode[i] - s * sigma * mode[n - 1 - i]));
    return r / amp;
  };
  double w_assigned = reflect_residual(parity == Parity::even ? 1.0 : -1.0);
  double w_opposite = reflect_residual(parity == Parity::even ? -1.0 : 1.0);
  if (w_assigned >= 1e-6 || w_opposite <= w_assigned)
    throw NumericalError("edge_parity: matrix parity test and reflection witness disagree");
  return {parity, w_assigned};
}

enum class ZakMethod { wilson, parity, pair };

struct ZakResult {
  int band = 0;
  double theta = 0.0;      // snapped to {0, pi} when `quantized`
  double theta_raw = 0.0;  // unsnapped Wilson value
  ZakMethod method = ZakMethod::wilson;
  std::size_t grid_size = 0;
  bool quantized = false;
};

// Wilson-loop sum over an ordered chain of periodic parts u_0 .. u_{N-1} at
// k_n = -pi + 2 pi n / N, closed through the quasi-periodic continuation
// u_N := u_0 e^{-2 pi i x}.  Gauge transformations u_n -> e^{i a_n} u_n cancel
// link by link, so the value is gauge-invariant to rounding.
inline double wilson_sum(const std::vector<std::vector<cplx>>& u,
                         const std::vector<double>& w_eps, const std::vector<double>& x) {
  std::size_t N = u.size();
  if (N < 2) throw ValidationError("wilson_sum: need at least two modes");
  auto inner = [&](const std::vector<cplx>& f, const std::vector<cplx>& g) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w_eps[i] * f[i] * std::conj(g[i]);
    return s;
  };
  double theta = 0.0;
  for (std::size_t n = 0; n + 1 < N; ++n) {
    cplx z = inner(u[n + 1], u[n]);
    if (std::abs(z) < 1e-3)
      throw NumericalError("wilson_sum: link modulus below 1e-3 (gap closure nearby)");
    theta -= std::arg(z);
  }
  std::vector<cplx> closing(u[0].size());
  for (std::size_t i = 0; i < closing.size(); ++i)
    closing[i] = u[0][i] * std::polar(1.0, -2.0 * kPi * x[i]);
  cplx z = inner(closing, u[N - 1]);
  if (std::abs(z) < 1e-3)
    throw NumericalError("wilson_sum: closing link modulus below 1e-3 (gap closure nearby)");
  theta -= std::arg(z);
  return theta;
}

namespace detail {

struct WilsonContext {
  const MediumProfile* p = nullptr;
  const Band* band = nullptr;
  SampleGrid grid;
  std::map<double, std::vector<cplx>> u_cache;  // keyed by k (dyadic, exact)
  std::map<double, double> e_cache;             // keyed by |k|
};

inline double wilson_energy(WilsonContext& ctx, double k_abs) {
  auto it = ctx.e_cache.find(k_abs);
  if (it != ctx.e_cache.end()) return it->second;
  const Band& b = *ctx.band;
  double E;
  if (k_abs < 1e-14 || k_abs > kPi - 1e-14) {
    E = band_edge_energy(b, k_abs < 1e-14 ? 0.0 : kPi);
  } else {
    auto D = [&](double e) { return discriminant(*ctx.p, e); };
    double t = 2.0 * std::cos(k_abs);
    // Warm bracket from previously solved neighbours when available.
    double e_lo = b.e_minus, e_hi = b.e_plus;
    auto lo = ctx.e_cache.lower_bound(k_abs);
    if (lo != ctx.e_cache.begin() && !ctx.e_cache.empty()) {
      auto below = std::prev(lo);
      auto above = lo;
      double guess_lo = e_lo, guess_hi = e_hi;
      if (b.k_minus == 0.0) {  // E increasing in |k|
        if (below != ctx.e_cache.end()) guess_lo = below->second;
        if (above != ctx.e_cache.end()) guess_hi = above->second;
      } else {  // E decreasing in |k|
        if (above != ctx.e_cache.end()) guess_lo = above->second;
        if (below != ctx.e_cache.end()) guess_hi = below->second;
      }
      double pad = 1e-9 * (1.0 + std::abs(guess_hi));
      guess_lo = std::max(e_lo, guess_lo - pad);
      guess_hi = std::min(e_hi, guess_hi + pad);
      if (guess_hi > guess_lo && (D(guess_lo) - t) * (D(guess_hi) - t) <= 0.0) {
        e_lo = guess_lo;
        e_hi = guess_hi;
      }
    }
    E = band_energy(D, e_lo, e_hi, t);
  }
  ctx.e_cache[k_abs] = E;
  return E;
}

inline const std::vector<cplx>& wilson_mode(WilsonContext& ctx, double k) {
  auto it = ctx.u_cache.find(k);
  if (it != ctx.u_cache.end()) return it->second;
  double E = wilson_energy(ctx, std::abs(k));
  BlochMode m = assemble_mode(*ctx.p, ctx.band->index, k, E, ctx.grid);
  return ctx.u_cache.emplace(k, std::move(m.u)).first->second;
}

inline double wilson_theta(WilsonContext& ctx, std::size_t N) {
  std::vector<std::vector<cplx>> u(N);
  for (std::size_t n = 0; n < N; ++n) {
    double k = -kPi + 2.0 * kPi * double(n) / double(N);
    u[n] = wilson_mode(ctx, k);
  }
  double theta = wilson_sum(u, ctx.grid.w_eps, ctx.grid.x);
  theta = reduce_mod_2pi(theta);
  if (theta > 1.5 * kPi) theta -= 2.0 * kPi;  // place 0 and pi in the interior
  return theta;
}

}  // namespace detail

// Zak phase of an isolated band by a Wilson-loop sum, with the k grid doubled
// from n_start until two consecutive values agree within 1e-2 (mod 2 pi).
// For inversion-symmetric crystals the value is snapped to {0, pi} when it
// lands within 5e-2 of one.
inline ZakResult zak_wilson(const MediumProfile& p, int band_index, std::size_t n_start = 256,
                            std::size_t n_max = 2048, std::size_t resolution = 1024) {
  if (band_index < 1) throw ValidationError("zak_wilson: band index is 1-based");
  auto set = band_edges_for(p, std::size_t(band_index));
  const Band& b = set.bands[std::size_t(band_index) - 1];
  if (b.lower_kind == EdgeKind::touching || b.upper_kind == EdgeKind::touching)
    throw ValidationError(
        "zak_wilson: band touches a neighbour (Dirac point at an edge); "
        "use zak_pair_dirac for the joint phase of the touching pair");
  detail::WilsonContext ctx;
  ctx.p = &p;
  ctx.band = &b;
  ctx.grid = detail::make_sample_grid(p, resolution);

  std::size_t N = std::max<std::size_t>(n_start, 8);
  double theta = detail::wilson_theta(ctx, N);
  for (;;) {
    if (2 * N > n_max)
      throw NumericalError("zak_wilson: Wilson sum did not settle below the grid cap");
    double theta2 = detail::wilson_theta(ctx, 2 * N);
    N *= 2;
    double moved = angle_dist(theta2, theta);
    theta = theta2;
    if (moved < 1e-2) break;
  }

  ZakResult r;
  r.band = band_index;
  r.theta_raw = theta;
  r.theta = theta;
  r.method = ZakMethod::wilson;
  r.grid_size = N;
  if (is_inversion_symmetric(p)) {
    for (double target : {0.0, kPi}) {
      if (angle_dist(theta, target) < 5e-2) {
        r.theta = target;
        r.quantized = true;
        break;
      }
    }
  }
  return r;
}

// Quantized Zak phase of an isolated band of an inversion-symmetric crystal
// from its two edge parities: 0 when they agree, pi when they differ.
inline ZakResult zak_parity(const MediumProfile& p, int band_index) {
  auto p0 = edge_parity(p, band_index, 0.0);
  auto p1 = edge_parity(p, band_index, kPi);
  ZakResult r;
  r.band = band_index;
  r.theta = p0.parity == p1.parity ? 0.0 : kPi;
  r.theta_raw = r.theta;
  r.method = ZakMethod::parity;
  r.quantized = true;
  return r;
}

// Joint Zak phase (mod 2 pi) of two bands that touch at a Dirac point, from
// the parities at the two non-touching edges (both at the quasimomentum
// opposite to the Dirac point's k*).
inline double zak_pair_dirac(const MediumProfile& p, int lower_band) {
  auto set = band_edges_for(p, std::size_t(lower_band) + 1);
  const Band& b = set.bands[std::size_t(lower_band) - 1];
  if (b.upper_kind != EdgeKind::touching)
    throw ValidationError("zak_pair_dirac: bands do not touch at the shared edge");
  double k_other = b.k_plus == 0.0 ? kPi : 0.0;
  auto pa = edge_parity(p, lower_band, k_other);
  auto pb = edge_parity(p, lower_band + 1, k_other);
  return pa.parity == pb.parity ? 0.0 : kPi;
}

struct BulkIndex {
  int band = 0;
  double gamma = 0.0;  // +1 or -1
  int ell = 0;         // Dirac points strictly below the gap
  double zak_sum = 0.0;
};

// gamma_j = (-1)^{j + ell - 1} exp(i sum of Zak phases of bands 1..j) for the
// gap above band j.  The sign is cross-checked against the parity of the
// upper edge mode (even <-> +1); disagreement is a hard error.
inline BulkIndex bulk_index(const MediumProfile& p, int band_index) {
  if (!is_inversion_symmetric(p))
    throw ValidationError("bulk_index: crystal is not inversion-symmetric");
  auto set = band_edges_for(p, std::size_t(band_index));
  const Band& top = set.bands[std::size_t(band_index) - 1];
  if (top.upper_kind == EdgeKind::touching)
    throw ValidationError("bulk_index: gap above the band is closed by a Dirac point");

  double sum = 0.0;
  int ell = 0;
  int m = 1;
  while (m <= band_index) {
    const Band& bm = set.bands[std::size_t(m) - 1];
    if (bm.upper_kind == EdgeKind::touching && m < band_index) {
      const Band& bn = set.bands[std::size_t(m)];
      if (bn.upper_kind == EdgeKind::touching)
        throw ValidationError("bulk_index: chained band touchings are unsupported");
      sum += zak_pair_dirac(p, m);
      ell += 1;
      m += 2;
    } else {
      sum += zak_parity(p, m).theta;
      m += 1;
    }
  }
  double residual = std::min(angle_dist(sum, 0.0), angle_dist(sum, kPi));
  if (residual > 5e-2)
    throw NumericalError("bulk_index: Zak sum is not a multiple of pi");
  double phase = angle_dist(sum, 0.0) < 0.5 * kPi ? 1.0 : -1.0;
  double parity_sign = (band_index + ell - 1) % 2 == 0 ? 1.0 : -1.0;

  BulkIndex out;
  out.band = band_index;
  out.ell = ell;
  out.zak_sum = sum;
  out.gamma = parity_sign * phase;

  auto upper = edge_parity(p, band_index, top.k_plus);
  double predicted = upper.parity == Parity::even ? 1.0 : -1.0;
  if (predicted != out.gamma)
    throw NumericalError("bulk_index: index disagrees with the upper edge parity");
  return out;
}

}  // namespace topoband
