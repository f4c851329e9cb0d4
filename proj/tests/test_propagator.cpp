#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "topoband/propagator.hpp"

using namespace topoband;
using Catch::Approx;

namespace {

MediumProfile random_structure(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4);
  std::uniform_real_distribution<double> coef(0.2, 8.0), width(0.1, 1.0);
  std::vector<std::array<double, 3>> layers;
  int k = count(rng);
  for (int i = 0; i < k; ++i) layers.push_back({width(rng), coef(rng), coef(rng)});
  return make_layered(layers);
}

}  // namespace

TEST_CASE("homogeneous monodromy has the closed form", "[propagator]") {
  auto vac = make_layered({{1.0, 1.0, 1.0}});
  double E = 2.7, w = std::sqrt(E);
  auto M = monodromy(vac, E).m;
  CHECK(M.a11 == Approx(std::cos(w)).margin(1e-14));
  CHECK(M.a12 == Approx(std::sin(w) / w).margin(1e-14));
  CHECK(M.a21 == Approx(-w * std::sin(w)).margin(1e-14));
  CHECK(M.a22 == Approx(std::cos(w)).margin(1e-14));
  CHECK(discriminant(vac, E) == Approx(2.0 * std::cos(w)).margin(1e-13));

  // M(n^2 pi^2) = (-1)^n Id.
  for (int n = 1; n <= 3; ++n) {
    auto Mn = monodromy(vac, double(n * n) * kPi * kPi).m;
    double s = (n % 2 == 0) ? 1.0 : -1.0;
    CHECK(std::abs(Mn.a11 - s) < 1e-12);
    CHECK(std::abs(Mn.a12) < 1e-12);
    CHECK(std::abs(Mn.a21) < 1e-11);
    CHECK(std::abs(Mn.a22 - s) < 1e-12);
  }
}

TEST_CASE("layer matrices extend to E <= 0 without branch trouble", "[propagator]") {
  auto vac = make_layered({{1.0, 1.0, 1.0}});
  CHECK(discriminant(vac, 0.0) == Approx(2.0).margin(1e-14));
  // E = -s^2 turns cos(sqrt E) into cosh(s).
  CHECK(discriminant(vac, -4.0) == Approx(2.0 * std::cosh(2.0)).margin(1e-12));
  auto M = monodromy(vac, -4.0).m;
  CHECK(M.a12 == Approx(std::sinh(2.0) / 2.0).margin(1e-12));
  CHECK(M.a21 == Approx(2.0 * std::sinh(2.0)).margin(1e-12));
}

TEST_CASE("det M = 1 over random structures and energies", "[propagator]") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> energy(-50.0, 400.0);
  for (int i = 0; i < 200; ++i) {
    auto p = random_structure(rng);
    double E = energy(rng);
    auto M = monodromy(p, E).m;
    // The determinant cancels to roundoff times the squared matrix norm;
    // entries grow like exp(sqrt(|E| eps mu)) for E well below the spectrum.
    double scale = 1.0 + M.a11 * M.a11 + M.a12 * M.a12 + M.a21 * M.a21 + M.a22 * M.a22;
    CHECK(std::abs(M.det() - 1.0) < 1e-13 * scale);
  }
}

TEST_CASE("discriminant is invariant under origin shifts", "[propagator]") {
  // Shifting conjugates M by Psi(x0); the trace cannot move.
  auto p = make_layered({{0.42, 3.8, 1.0}, {0.58, 1.0, 1.0}});
  for (double x0 : {0.1, 0.21, 0.42, 0.77}) {
    auto s = shift_origin(p, x0);
    for (double E : {1.0, 7.5, 40.0, 245.0}) {
      CHECK(discriminant(s, E) == Approx(discriminant(p, E)).margin(1e-11 * (1.0 + std::abs(E))));
    }
  }
}

TEST_CASE("fundamental_solution at the period equals the monodromy", "[propagator]") {
  auto p = make_layered({{0.3, 2.5, 1.3}, {0.45, 1.0, 1.0}, {0.25, 4.0, 1.0}});
  double E = 17.3;
  auto F = fundamental_solution(p, E, 1.0).m;
  auto M = monodromy(p, E).m;
  CHECK(F.a11 == Approx(M.a11).margin(1e-12));
  CHECK(F.a12 == Approx(M.a12).margin(1e-12));
  CHECK(F.a21 == Approx(M.a21).margin(1e-11));
  CHECK(F.a22 == Approx(M.a22).margin(1e-12));
  // Wronskian: det Psi(x) = 1 at interior points too.
  for (double x : {0.1, 0.3, 0.62, 0.9}) {
    CHECK(std::abs(fundamental_solution(p, E, x).m.det() - 1.0) < 1e-12);
  }
}

TEST_CASE("fundamental_solution extends by the cocycle", "[propagator]") {
  auto p = make_layered({{0.42, 3.8, 1.0}, {0.58, 1.0, 1.0}});
  double E = 5.0;
  auto M = monodromy_matrix<double>(p, E);
  auto A = fundamental_solution(p, E, 2.37).m;
  auto B = fundamental_solution(p, E, 0.37).m * mat_pow(M, 2);
  CHECK(mat_norm_inf(A - B) < 1e-11);
  auto C = fundamental_solution(p, E, -1.63).m;
  auto D = fundamental_solution(p, E, 0.37).m * mat_pow(M, -2);
  CHECK(mat_norm_inf(C - D) < 1e-11);
}

TEST_CASE("complex monodromy matches the real one on the real axis", "[propagator]") {
  auto p = make_layered({{0.38, 4.2, 1.0}, {0.62, 1.0, 1.0}});
  double omega = 3.7;
  auto Mc = complex_monodromy(p, cplx(omega, 0.0)).m;
  auto Mr = monodromy(p, omega * omega).m;
  CHECK(std::abs(Mc.a11 - Mr.a11) < 1e-12);
  CHECK(std::abs(Mc.a12 - Mr.a12) < 1e-12);
  CHECK(std::abs(Mc.a21 - Mr.a21) < 1e-11);
  CHECK(std::abs(Mc.a22 - Mr.a22) < 1e-12);
  CHECK(std::abs(Mc.det() - 1.0) < 1e-12);
}

TEST_CASE("monodromy_dE agrees with finite differences", "[propagator]") {
  auto p = make_layered({{0.42, 3.8, 1.0}, {0.58, 1.0, 1.0}});
  for (double E : {2.0, 11.0, 53.0}) {
    auto dM = monodromy_dE(p, E).m;
    double h = 1e-6 * (1.0 + std::abs(E));
    auto Mp = monodromy(p, E + h).m, Mm = monodromy(p, E - h).m;
    CHECK(dM.a11 == Approx((Mp.a11 - Mm.a11) / (2 * h)).epsilon(1e-5).margin(1e-8));
    CHECK(dM.a12 == Approx((Mp.a12 - Mm.a12) / (2 * h)).epsilon(1e-5).margin(1e-8));
    CHECK(dM.a21 == Approx((Mp.a21 - Mm.a21) / (2 * h)).epsilon(1e-5).margin(1e-7));
    CHECK(dM.a22 == Approx((Mp.a22 - Mm.a22) / (2 * h)).epsilon(1e-5).margin(1e-8));
  }
}

TEST_CASE("discriminant derivatives match the homogeneous closed form", "[propagator]") {
  auto vac = make_layered({{1.0, 1.0, 1.0}});
  double E = 2.7, u = std::sqrt(E);
  // D = 2 cos(sqrt E), so D' = -sin(u)/u and D'' = -cos(u)/(2u^2) + sin(u)/(2u^3).
  double d1 = -std::sin(u) / u;
  double d2 = -std::cos(u) / (2.0 * u * u) + std::sin(u) / (2.0 * u * u * u);
  CHECK(discriminant_dE(vac, E) == Approx(d1).epsilon(1e-9));
  CHECK(discriminant_d2E(vac, E) == Approx(d2).epsilon(1e-6));
}

TEST_CASE("floquet_eigen resolves the three regimes", "[propagator]") {
  auto vac = make_layered({{1.0, 1.0, 1.0}});
  auto band = floquet_eigen(vac, kPi * kPi / 4.0);  // D = 0
  CHECK(band.regime == Regime::band);
  CHECK(std::abs(std::abs(band.lambda1) - 1.0) < 1e-12);

  auto edge = floquet_eigen(vac, kPi * kPi);  // D = -2
  CHECK(edge.regime == Regime::edge);

  auto p = make_layered({{0.42, 3.8, 1.0}, {0.58, 1.0, 1.0}});
  auto gap = floquet_eigen(p, 5.0);
  CHECK(gap.regime == Regime::gap);
  CHECK(std::abs(gap.lambda1) < 1.0);
  CHECK(std::abs(gap.lambda2) > 1.0);
  CHECK(std::abs(gap.lambda1 * gap.lambda2 - 1.0) < 1e-10);
}

TEST_CASE("floquet eigenvectors satisfy the eigen equation", "[propagator]") {
  // Trace 3, det 1: a strongly hyperbolic (gap) matrix.
  TransferMatrix tm{{2.0, 1.0, 1.0, 1.0}, 5.0};
  auto f = floquet_eigen(tm);
  REQUIRE(f.regime == Regime::gap);
  CHECK(f.lambda2.real() == Approx((3.0 + std::sqrt(5.0)) / 2.0));
  CHECK(f.lambda1.real() == Approx((3.0 - std::sqrt(5.0)) / 2.0));
  for (int which : {1, 2}) {
    auto v = which == 1 ? f.v1 : f.v2;
    auto lam = which == 1 ? f.lambda1 : f.lambda2;
    cplx rx = tm.m.a11 * v.x + tm.m.a12 * v.y - lam * v.x;
    cplx ry = tm.m.a21 * v.x + tm.m.a22 * v.y - lam * v.y;
    CHECK(std::abs(rx) < 1e-12);
    CHECK(std::abs(ry) < 1e-12);
  }
}

TEST_CASE("defect_transfer multiplies constant layers", "[propagator]") {
  DefectSpec d;
  d.d1 = -0.1;
  d.d2 = 0.2;
  d.layers = {{0.12, 2.0, 1.5}, {0.18, 3.0, 1.0}};
  double E = 9.0;
  auto T = defect_transfer(d, E).m;
  CHECK(std::abs(T.det() - 1.0) < 1e-13);
  // Order: layer 2 acts after layer 1 (U(d2) = m U(d1)).
  auto L1 = layer_matrix_energy(2.0, 1.5, 0.12, E);
  auto L2 = layer_matrix_energy(3.0, 1.0, 0.18, E);
  CHECK(mat_norm_inf(T - L2 * L1) < 1e-14);

  DefectSpec none;  // zero width: identity
  CHECK(mat_norm_inf(defect_transfer(none, E).m - Mat2<double>::identity()) == 0.0);
}

TEST_CASE("build_mesh certifies the propagator against the monodromy", "[propagator]") {
  auto p = make_layered({{0.25, 3.0, 1.0}, {0.5, 1.0, 1.0}, {0.25, 3.0, 1.0}});
  double E = 12.0;
  auto mesh = build_mesh(p, E, {});
  REQUIRE(!mesh.x.empty());
  CHECK(mesh.x.front() == 0.0);
  CHECK(mesh.x.back() == 1.0);
  auto M = monodromy(p, E).m;
  CHECK(mat_norm_inf(mesh.psi.back() - M) < 1e-9);
  CHECK(mat_norm_inf(mesh.m - M) < 1e-9);
  // Simpson weights integrate 1 over the period.
  double sum = 0.0;
  for (double w : mesh.w) sum += w;
  CHECK(sum == Approx(1.0).margin(1e-12));
}
