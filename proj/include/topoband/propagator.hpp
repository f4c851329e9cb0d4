#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "topoband/common.hpp"
#include "topoband/mat2.hpp"
#include "topoband/medium.hpp"
#include "topoband/numerics.hpp"

namespace topoband {

// State convention throughout: U = (psi, psi'/mu), so U' = A(x) U with
// A = [[0, mu],[-E eps, 0]] and both components stay continuous across
// material jumps.
template <typename T>
struct TransferMatrixT {
  Mat2<T> m;
  T energy{};
};
using TransferMatrix = TransferMatrixT<double>;
using ComplexTransferMatrix = TransferMatrixT<cplx>;

namespace detail {

// c = cos(sqrt(w)), s = sinc(sqrt(w)) = sin(sqrt w)/sqrt w; both entire in w,
// so the branch of the square root never matters.
inline void cos_sinc(double w, double& c, double& s) {
  if (std::abs(w) < 1e-8) {
    c = 1.0 - w / 2.0 + w * w / 24.0 - w * w * w / 720.0;
    s = 1.0 - w / 6.0 + w * w / 120.0 - w * w * w / 5040.0;
  } else if (w > 0.0) {
    double z = std::sqrt(w);
    c = std::cos(z);
    s = std::sin(z) / z;
  } else {
    double z = std::sqrt(-w);
    c = std::cosh(z);
    s = std::sinh(z) / z;
  }
}

inline void cos_sinc(cplx w, cplx& c, cplx& s) {
  if (std::abs(w) < 1e-8) {
    c = 1.0 - w / 2.0 + w * w / 24.0;
    s = 1.0 - w / 6.0 + w * w / 120.0;
  } else {
    cplx z = std::sqrt(w);
    c = std::cos(z);
    s = std::sin(z) / z;
  }
}

}  // namespace detail

// Transfer matrix of a homogeneous layer of width d.  Entries are entire
// functions of E; det == 1 up to rounding.
template <typename T>
Mat2<T> layer_matrix_energy(double eps, double mu, double d, T E) {
  T w = E * (eps * mu * d * d);
  T c, s;
  detail::cos_sinc(w, c, s);
  return {c, s * (mu * d), s * (-(eps * d)) * E, c};
}

inline ComplexTransferMatrix layer_matrix(double eps, double mu, double d, cplx omega) {
  cplx E = omega * omega;
  return {layer_matrix_energy(eps, mu, d, E), E};
}

namespace detail {

// One classical RK4 step for Psi' = A(x) Psi.
template <typename T, typename AF>
Mat2<T> rk4_step(AF&& A, double x, double h, const Mat2<T>& y) {
  Mat2<T> k1 = A(x) * y;
  Mat2<T> k2 = A(x + 0.5 * h) * (y + k1 * T(0.5 * h));
  Mat2<T> k3 = A(x + 0.5 * h) * (y + k2 * T(0.5 * h));
  Mat2<T> k4 = A(x + h) * (y + k3 * T(h));
  return y + (k1 + k2 * T(2) + k3 * T(2) + k4) * T(h / 6.0);
}

// Adaptive step-doubling RK4 on [x0, x1] with local extrapolation.
template <typename T, typename AF>
Mat2<T> rk4_adaptive(AF&& A, double x0, double x1, Mat2<T> y, double rel_tol) {
  double len = x1 - x0;
  if (len <= 0.0) return y;
  double x = x0;
  double h = len;
  int guard = 0;
  while (x < x1 - 1e-15 * (1.0 + std::abs(x1))) {
    if (++guard > 2000000) throw NumericalError("rk4_adaptive: step count exceeded");
    h = std::min(h, x1 - x);
    Mat2<T> big = rk4_step(A, x, h, y);
    Mat2<T> half = rk4_step(A, x, 0.5 * h, y);
    half = rk4_step(A, x + 0.5 * h, 0.5 * h, half);
    double err = mat_norm_inf(half - big) / 15.0;
    double scale = mat_norm_inf(half) + 1.0;
    if (err <= rel_tol * scale || h <= 1e-14 * len) {
      y = half + (half - big) * T(1.0 / 15.0);
      x += h;
      double grow = err > 0.0 ? 0.9 * std::pow(rel_tol * scale / err, 0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(rel_tol * scale / err, 0.25));
    }
  }
  return y;
}

}  // namespace detail

// Transfer across the relative sub-interval [t0, t1] of one piece: constant
// content in closed form, sampled content by adaptive RK4 between sample
// nodes (the coefficient is linear there, so no kink is crossed mid-step).
template <typename T>
Mat2<T> piece_transfer(const Piece& pc, T E, double t0, double t1, double rel_tol = 1e-12) {
  if (t1 <= t0) return Mat2<T>::identity();
  if (pc.eps.is_constant() && pc.mu.is_constant())
    return layer_matrix_energy(pc.eps.value, pc.mu.value, (t1 - t0) * pc.width, E);
  auto A = [&](double t) -> Mat2<T> {
    return {T(0), T(pc.mu.eval(t) * pc.width), T(-pc.eps.eval(t) * pc.width) * E, T(0)};
  };
  std::size_t n = std::max(pc.eps.samples.size(), pc.mu.samples.size());
  n = std::max<std::size_t>(n, 2);
  Mat2<T> y = Mat2<T>::identity();
  auto node = [&](std::size_t j) { return double(j) / double(n - 1); };
  std::size_t j0 = std::min<std::size_t>(std::size_t(t0 * double(n - 1)), n - 2);
  double lo = t0;
  for (std::size_t j = j0; j + 1 < n && lo < t1; ++j) {
    double hi = std::min(t1, node(j + 1));
    if (hi > lo) y = detail::rk4_adaptive(A, lo, hi, y, rel_tol);
    lo = hi;
  }
  return y;
}

template <typename T>
Mat2<T> monodromy_matrix(const MediumProfile& p, T E, double rel_tol = 1e-12) {
  if (p.pieces.empty()) throw ValidationError("monodromy: empty profile");
  Mat2<T> Psi = Mat2<T>::identity();
  for (const auto& pc : p.pieces) Psi = piece_transfer(pc, E, 0.0, 1.0, rel_tol) * Psi;
  return Psi;
}

inline TransferMatrix monodromy(const MediumProfile& p, double E) {
  return {monodromy_matrix<double>(p, E), E};
}

inline ComplexTransferMatrix complex_monodromy(const MediumProfile& p, cplx omega) {
  cplx E = omega * omega;
  return {monodromy_matrix<cplx>(p, E), E};
}

inline double discriminant(const MediumProfile& p, double E) {
  return monodromy_matrix<double>(p, E).trace();
}

// Psi_E(x) with Psi_E(0) = Id, extended to all x through the cocycle
// Psi(x + n) = Psi(x) M^n.
inline TransferMatrix fundamental_solution(const MediumProfile& p, double E, double x) {
  double nf = std::floor(x);
  double r = x - nf;
  auto n = (long long)(nf);
  Mat2<double> Psi = Mat2<double>::identity();
  if (r > 0.0) {
    auto b = p.breakpoints();
    for (std::size_t i = 0; i < p.pieces.size() && b[i] < r; ++i) {
      double hi = std::min(r, b[i + 1]);
      Psi = piece_transfer(p.pieces[i], E, 0.0, (hi - b[i]) / p.pieces[i].width) * Psi;
    }
  }
  if (n != 0) Psi = Psi * mat_pow(monodromy_matrix<double>(p, E), n);
  return {Psi, E};
}

// Transfer matrix across a defect region at energy E, ordered so that
// U(d2) = m * U(d1).
inline TransferMatrix defect_transfer(const DefectSpec& d, double E) {
  Mat2<double> m = Mat2<double>::identity();
  for (const auto& l : d.layers) m = layer_matrix_energy(l.eps, l.mu, l.width, E) * m;
  return {m, E};
}

enum class Regime { band, edge, gap };

// Eigen-decomposition of a real unimodular transfer matrix.  lambda1 is the
// smaller eigenvalue in modulus; inside a band |lambda1| = |lambda2| = 1 and
// lambda1 carries Im >= 0 (lambda1 = e^{ik}, k in [0, pi]).
struct FloquetData {
  cplx lambda1, lambda2;
  Vec2<cplx> v1, v2;
  double discriminant = 0.0;
  double energy = 0.0;
  Regime regime = Regime::band;
  bool degenerate = false;
};

inline FloquetData floquet_eigen(const TransferMatrix& tm) {
  const Mat2<double>& m = tm.m;
  double D = m.trace();
  FloquetData f;
  f.discriminant = D;
  f.energy = tm.energy;
  double edge_tol = 1e-9 * (1.0 + std::abs(D));
  double excess = std::abs(D) - 2.0;
  if (std::abs(excess) <= edge_tol) {
    f.regime = Regime::edge;
    f.lambda1 = f.lambda2 = D / 2.0 > 0 ? 1.0 : -1.0;
  } else if (excess < 0.0) {
    f.regime = Regime::band;
    f.lambda1 = cplx(D / 2.0, 0.5 * std::sqrt(4.0 - D * D));
    f.lambda2 = std::conj(f.lambda1);
  } else {
    f.regime = Regime::gap;
    double sg = D > 0 ? 1.0 : -1.0;
    double big = 0.5 * (D + sg * std::sqrt(D * D - 4.0));
    f.lambda1 = 1.0 / big;
    f.lambda2 = big;
  }
  double scale = mat_norm_inf(m);
  double col_tol = 1e-11 * scale;
  bool fallback = !(std::abs(m.a12) > col_tol);
  auto vec_for = [&](cplx lam) -> Vec2<cplx> {
    Vec2<cplx> v;
    if (!fallback) {
      v = {cplx(m.a12), lam - m.a11};
    } else if (std::abs(m.a21) > col_tol || std::abs(lam - m.a22) > col_tol) {
      v = {lam - m.a22, cplx(m.a21)};
    } else {
      return {cplx(0.0), cplx(0.0)};
    }
    double nrm = vec_norm(v);
    return {v.x * (1.0 / nrm), v.y * (1.0 / nrm)};
  };
  f.v1 = vec_for(f.lambda1);
  f.v2 = vec_for(f.lambda2);
  f.degenerate = fallback;
  if (vec_norm(f.v1) == 0.0 || vec_norm(f.v2) == 0.0) {
    // m is (near) a multiple of the identity: any basis is an eigenbasis.
    f.v1 = {1.0, 0.0};
    f.v2 = {0.0, 1.0};
    f.degenerate = true;
  }
  return f;
}

inline FloquetData floquet_eigen(const MediumProfile& p, double E) {
  return floquet_eigen(monodromy(p, E));
}

// Simpson-ready sampling of Psi_E and the coefficients over one period.
// Nodes are packed piece by piece (shared abscissae appear once per adjacent
// piece so one-sided coefficient values stay attached to their piece).
struct PropagatorMesh {
  double energy = 0.0;
  std::vector<double> x;
  std::vector<double> w;  // Simpson weights; integral f = sum w_i f(x_i)
  std::vector<Mat2<double>> psi;
  std::vector<double> eps, mu;
  std::vector<std::pair<std::size_t, std::size_t>> piece_ranges;  // [begin, end)
  Mat2<double> m;  // Psi(1)
};

inline PropagatorMesh build_mesh(const MediumProfile& p, double E,
                                 const std::vector<double>& extra_cuts = {}, int density = 24) {
  PropagatorMesh mesh;
  mesh.energy = E;
  auto bp = p.breakpoints();
  auto cuts = merge_breakpoints({bp, extra_cuts});
  Mat2<double> Psi = Mat2<double>::identity();
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    double a = cuts[c], z = cuts[c + 1];
    auto [ip, tmid] = p.locate(0.5 * (a + z));
    (void)tmid;
    const Piece& pc = p.pieces[ip];
    bool constant = pc.eps.is_constant() && pc.mu.is_constant();
    double oscil = std::sqrt(std::max(std::abs(E), 1.0) * pc.eps.max_value() * pc.mu.max_value());
    auto n_int = std::size_t(std::ceil(double(density) * oscil * (z - a)));
    n_int = std::max<std::size_t>(n_int, 32);
    if (!constant) n_int = std::max<std::size_t>(n_int, 256);
    if (n_int % 2 == 1) ++n_int;
    std::size_t n_nodes = n_int + 1;
    auto wts = simpson_weights(n_nodes, z - a);
    std::size_t begin = mesh.x.size();
    double piece_start = bp[ip];
    for (std::size_t k = 0; k < n_nodes; ++k) {
      double xk = a + (z - a) * double(k) / double(n_int);
      double t = std::clamp((xk - piece_start) / pc.width, 0.0, 1.0);
      if (k > 0) {
        double tprev = std::clamp((mesh.x.back() - piece_start) / pc.width, 0.0, 1.0);
        Psi = piece_transfer(pc, E, tprev, t) * Psi;
      }
      mesh.x.push_back(xk);
      mesh.w.push_back(wts[k]);
      mesh.eps.push_back(pc.eps.eval(t));
      mesh.mu.push_back(pc.mu.eval(t));
      mesh.psi.push_back(Psi);
    }
    mesh.piece_ranges.push_back({begin, mesh.x.size()});
  }
  mesh.m = Psi;
  return mesh;
}

namespace detail {

// Q1 = Psi^{-1} [[0,0],[-eps,0]] Psi for the E-derivative flow.
inline Mat2<double> q1_at(const Mat2<double>& psi, double eps) {
  double u1 = psi.a11, v1 = psi.a12;
  return {eps * u1 * v1, eps * v1 * v1, -eps * u1 * u1, -eps * u1 * v1};
}

inline Mat2<double> p1_integral(const PropagatorMesh& mesh) {
  Mat2<double> P1{};
  for (std::size_t i = 0; i < mesh.x.size(); ++i)
    P1 = P1 + q1_at(mesh.psi[i], mesh.eps[i]) * mesh.w[i];
  return P1;
}

}  // namespace detail

// dM/dE = M * integral over one period of Q1.
inline TransferMatrix monodromy_dE(const MediumProfile& p, double E) {
  auto mesh = build_mesh(p, E);
  return {mesh.m * detail::p1_integral(mesh), E};
}

inline double discriminant_dE(const MediumProfile& p, double E) {
  auto mesh = build_mesh(p, E);
  return (mesh.m * detail::p1_integral(mesh)).trace();
}

// d2M/dE2 = M (R(1)^2 + integral of [Q1, R]), R(x) = integral of Q1 to x.
// The quadrature route is cross-checked in-place against Richardson finite
// differences of the discriminant; disagreement is a hard error.
inline double discriminant_d2E(const MediumProfile& p, double E) {
  auto mesh = build_mesh(p, E);
  std::vector<Mat2<double>> q1(mesh.x.size());
  for (std::size_t i = 0; i < mesh.x.size(); ++i)
    q1[i] = detail::q1_at(mesh.psi[i], mesh.eps[i]);
  // R on the packed mesh: per-piece cumulative Simpson plus running offset.
  std::vector<Mat2<double>> R(mesh.x.size());
  Mat2<double> offset{};
  for (auto [b, e] : mesh.piece_ranges) {
    double h = mesh.x[b + 1] - mesh.x[b];
    std::vector<Mat2<double>> seg(q1.begin() + long(b), q1.begin() + long(e));
    auto cum = cumulative_simpson(seg, h);
    for (std::size_t i = b; i < e; ++i) R[i] = offset + cum[i - b];
    offset = R[e - 1];
  }
  Mat2<double> comm{};
  for (std::size_t i = 0; i < mesh.x.size(); ++i)
    comm = comm + commutator(q1[i], R[i]) * mesh.w[i];
  Mat2<double> R1 = offset;
  double quad = (mesh.m * (R1 * R1 + comm)).trace();

  double h = 1e-3 * (1.0 + std::abs(E));
  auto second = [&](double hh) {
    return (discriminant(p, E + hh) - 2.0 * discriminant(p, E) + discriminant(p, E - hh)) /
           (hh * hh);
  };
  double fd = (4.0 * second(0.5 * h) - second(h)) / 3.0;
  double diff = std::abs(quad - fd);
  if (diff > 1e-3 * std::max(std::abs(quad), std::abs(fd)) && diff > 1e-7 * (1.0 + std::abs(E)))
    throw NumericalError("discriminant_d2E: quadrature and finite-difference routes disagree");
  return quad;
}

}  // namespace topoband
