#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "topoband/spectrum.hpp"

using namespace topoband;
using Catch::Approx;

namespace {

const MediumProfile& vacuum() {
  static auto p = make_layered({{1.0, 1.0, 1.0}}, "vacuum");
  return p;
}

// Two copies of a symmetric half cell; every second gap of the half-period
// description closes exactly, leaving certified Dirac points.
const MediumProfile& doubled() {
  static auto p = make_layered({{0.0625, 3.0, 1.0},
                                {0.125, 1.0, 1.0},
                                {0.0625, 3.0, 1.0},
                                {0.0625, 3.0, 1.0},
                                {0.125, 1.0, 1.0},
                                {0.0625, 3.0, 1.0}},
                               "doubled");
  return p;
}

}  // namespace

TEST_CASE("vacuum band edges sit at n^2 pi^2 and all touch", "[spectrum]") {
  auto set = band_edges(vacuum(), 170.0);
  REQUIRE(set.bands.size() >= 4);
  for (std::size_t j = 0; j < 4; ++j) {
    const Band& b = set.bands[j];
    CHECK(b.index == int(j) + 1);
    CHECK(b.e_minus == Approx(double(j * j) * kPi * kPi).margin(1e-7));
    CHECK(b.e_plus == Approx(double((j + 1) * (j + 1)) * kPi * kPi).margin(1e-7));
    CHECK(b.upper_kind == EdgeKind::touching);
    if (j > 0) CHECK(b.lower_kind == EdgeKind::touching);
  }
  // k* alternates: D = -2 at odd multiples (k = pi), D = +2 at even ones (k = 0).
  CHECK(set.bands[0].k_plus == Approx(kPi));
  CHECK(set.bands[1].k_plus == Approx(0.0));
  CHECK(set.bands[2].k_plus == Approx(kPi));
}

TEST_CASE("layered band edges alternate and bound open gaps", "[spectrum]") {
  auto p = make_layered({{0.42, 3.8, 1.0}, {0.58, 1.0, 1.0}});
  auto set = band_edges(p, 300.0);
  REQUIRE(set.bands.size() >= 7);
  double prev_e = -1.0;
  for (std::size_t i = 0; i < set.edges.size(); ++i) {
    const auto& e = set.edges[i];
    CHECK(e.energy > prev_e);
    prev_e = e.energy;
    // With every gap open the d_sign pattern is +,-,-,+,+,-,-,+,...
    int expect = (i % 4 == 0 || i % 4 == 3) ? 1 : -1;
    CHECK(e.kind == EdgeKind::simple);
    CHECK(e.d_sign == expect);
    CHECK(e.k_star == Approx(e.d_sign == 1 ? 0.0 : kPi));
    // Edge certification: |D| = 2 to root tolerance.
    CHECK(std::abs(std::abs(discriminant(p, e.energy)) - 2.0) < 1e-8);
  }
  for (std::size_t j = 0; j + 1 < set.bands.size(); ++j) {
    CHECK(set.bands[j].e_plus <= set.bands[j + 1].e_minus + 1e-12);
    CHECK(set.bands[j].e_minus < set.bands[j].e_plus);
  }
}

TEST_CASE("dispersion reproduces E(k) = k^2 in vacuum", "[spectrum]") {
  auto d = dispersion(vacuum(), 1, 64);
  REQUIRE(d.points.size() == 64);
  CHECK(d.points.front().k == 0.0);
  CHECK(d.points.back().k == Approx(kPi));
  double prev = -1.0;
  for (const auto& pt : d.points) {
    CHECK(pt.energy == Approx(pt.k * pt.k).margin(1e-8));
    CHECK(pt.energy > prev);  // strictly monotone within a band
    prev = pt.energy;
    CHECK(pt.residual < 1e-8);
  }
  // Band 2 runs backwards: E(k) decreases from 4 pi^2 at k = 0... check ends.
  auto d2 = dispersion(vacuum(), 2, 33);
  CHECK(d2.points.front().energy == Approx(4.0 * kPi * kPi).margin(1e-6));
  CHECK(d2.points.back().energy == Approx(kPi * kPi).margin(1e-6));
}

TEST_CASE("dispersion residuals are small on a layered crystal", "[spectrum]") {
  auto p = make_layered({{0.38, 4.2, 1.0}, {0.62, 1.0, 1.0}});
  for (int band : {1, 2, 3}) {
    auto d = dispersion(p, band, 48);
    for (const auto& pt : d.points) CHECK(pt.residual < 1e-8);
  }
}

TEST_CASE("homogeneous Dirac points carry sigma, D'' and the exact slope", "[spectrum]") {
  auto scan = find_dirac_points(vacuum(), 170.0);
  REQUIRE(scan.points.size() == 4);
  for (int n = 1; n <= 4; ++n) {
    const auto& dp = scan.points[std::size_t(n) - 1];
    CHECK(dp.e_star == Approx(double(n * n) * kPi * kPi).epsilon(1e-7));
    CHECK(dp.k_star == Approx(n % 2 == 1 ? kPi : 0.0));
    CHECK(dp.sigma == (n % 2 == 1 ? -1 : 1));
    CHECK(dp.lower_band == n);
    // |D''| = 1/(2 E*), slope = sqrt(2/|D''|) = 2 n pi.
    CHECK(std::abs(dp.d2) == Approx(1.0 / (2.0 * dp.e_star)).epsilon(1e-6));
    CHECK(dp.slope == Approx(2.0 * double(n) * kPi).epsilon(1e-6));
    CHECK(dp.matrix_residual < 1e-6);
    CHECK(dirac_slope_check(vacuum(), dp) < 1e-3);
  }
}

TEST_CASE("doubled cells close every second gap into a Dirac point", "[spectrum]") {
  auto scan = find_dirac_points(doubled(), 160.0);
  REQUIRE(scan.points.size() >= 2);
  auto set = band_edges(doubled(), 160.0);
  for (const auto& dp : scan.points) {
    // Tangency from below: the two bands share the edge energy.
    const Band& lower = set.bands.at(std::size_t(dp.lower_band) - 1);
    CHECK(lower.upper_kind == EdgeKind::touching);
    CHECK(lower.e_plus == Approx(dp.e_star).margin(1e-8));
    // The band above the touching may be truncated at e_max and absent.
    if (dp.lower_band < int(set.bands.size())) {
      const Band& upper = set.bands.at(std::size_t(dp.lower_band));
      CHECK(upper.e_minus == Approx(dp.e_star).margin(1e-8));
    }
    CHECK(dp.matrix_residual < 1e-6);
    CHECK(dirac_slope_check(doubled(), dp) < 1e-3);
  }
  // The half-cell's own gaps stay open: bands 2/3 of the doubled description.
  CHECK(set.bands[1].e_plus < set.bands[2].e_minus - 1e-3);
}

TEST_CASE("band_edges keeps hair-thin open gaps open", "[spectrum]") {
  // A weak modulation opens a second gap of width ~1e-3; the discriminant
  // overshoots +2 by only ~1e-9 there, which must still classify as two
  // simple edges rather than a tangency.
  auto hom = make_layered({{1.0, 1.0, 1.0}});
  auto q = PerturbationProfile::from_pieces(
      {{0.5, Coefficient::constant(1.0), Coefficient::constant(0.0)},
       {0.5, Coefficient::constant(-1.0), Coefficient::constant(0.0)}});
  auto pp = apply_perturbation(hom, q, 0.005);
  auto set = band_edges_for(pp, 3);
  REQUIRE(set.bands.size() >= 3);
  CHECK(set.bands[1].upper_kind == EdgeKind::simple);
  CHECK(set.bands[2].lower_kind == EdgeKind::simple);
  double w = set.bands[2].e_minus - set.bands[1].e_plus;
  CHECK(w > 1e-4);
  CHECK(w < 5e-3);
}

TEST_CASE("vacuum boundary-condition eigenvalues are classical", "[spectrum]") {
  auto bc = bc_eigenvalues(vacuum(), 6);
  REQUIRE(bc.periodic.size() >= 5);
  REQUIRE(bc.dirichlet.size() >= 4);
  REQUIRE(bc.neumann.size() >= 4);
  REQUIRE(bc.semiperiodic.size() >= 4);
  // Periodic: 0, then (2 m pi)^2 doubled.
  CHECK(bc.periodic[0] == Approx(0.0).margin(1e-9));
  CHECK(bc.periodic[1] == Approx(4.0 * kPi * kPi).margin(1e-6));
  CHECK(bc.periodic[2] == Approx(4.0 * kPi * kPi).margin(1e-6));
  // Semi-periodic: ((2m+1) pi)^2 doubled.
  CHECK(bc.semiperiodic[0] == Approx(kPi * kPi).margin(1e-7));
  CHECK(bc.semiperiodic[1] == Approx(kPi * kPi).margin(1e-7));
  CHECK(bc.semiperiodic[2] == Approx(9.0 * kPi * kPi).margin(1e-6));
  // Dirichlet: n^2 pi^2 from n = 1; Neumann adds the zero mode.
  CHECK(bc.dirichlet[0] == Approx(kPi * kPi).margin(1e-7));
  CHECK(bc.dirichlet[1] == Approx(4.0 * kPi * kPi).margin(1e-6));
  CHECK(bc.neumann[0] == Approx(0.0).margin(1e-9));
  CHECK(bc.neumann[1] == Approx(kPi * kPi).margin(1e-7));
}

TEST_CASE("bc_eigenvalues enforces the interlacing chain", "[spectrum]") {
  // The constructor itself throws on a violated chain; spot-check the first
  // islands on a generic symmetric crystal.
  auto p = make_layered({{0.21, 3.8, 1.0}, {0.58, 1.0, 1.0}, {0.21, 3.8, 1.0}});
  auto bc = bc_eigenvalues(p, 8);
  REQUIRE(bc.periodic.size() >= 3);
  REQUIRE(bc.semiperiodic.size() >= 2);
  REQUIRE(bc.dirichlet.size() >= 2);
  REQUIRE(bc.neumann.size() >= 3);
  // E1N <= E1P < E1S <= E2S < E2P <= E3P: the first two spectral islands.
  CHECK(bc.neumann[0] <= bc.periodic[0] + 1e-9);
  CHECK(bc.periodic[0] < bc.semiperiodic[0]);
  CHECK(bc.semiperiodic[0] <= bc.semiperiodic[1] + 1e-9);
  CHECK(bc.semiperiodic[1] < bc.periodic[1]);
  CHECK(bc.periodic[1] <= bc.periodic[2] + 1e-9);
  // Dirichlet and Neumann eigenvalues land in the closed gaps:
  // gap 1 = [E1S, E2S] holds E1D and E2N; gap 2 = [E2P, E3P] holds E2D and E3N.
  CHECK(bc.semiperiodic[0] <= bc.dirichlet[0] + 1e-8);
  CHECK(bc.dirichlet[0] <= bc.semiperiodic[1] + 1e-8);
  CHECK(bc.semiperiodic[0] <= bc.neumann[1] + 1e-8);
  CHECK(bc.neumann[1] <= bc.semiperiodic[1] + 1e-8);
  CHECK(bc.periodic[1] <= bc.dirichlet[1] + 1e-8);
  CHECK(bc.dirichlet[1] <= bc.periodic[2] + 1e-8);
  CHECK(bc.periodic[1] <= bc.neumann[2] + 1e-8);
  CHECK(bc.neumann[2] <= bc.periodic[2] + 1e-8);
}

TEST_CASE("band_edges_for extends the window until enough bands close", "[spectrum]") {
  auto p = make_layered({{0.42, 3.8, 1.0}, {0.58, 1.0, 1.0}});
  auto set = band_edges_for(p, 8);
  CHECK(set.bands.size() >= 8);
  CHECK_THROWS_AS(bc_eigenvalues(p, 0), ValidationError);
}

TEST_CASE("dispersion rejects bad band indices", "[spectrum]") {
  CHECK_THROWS_AS(dispersion(vacuum(), 0, 16), ValidationError);
  auto p = make_layered({{0.42, 3.8, 1.0}, {0.58, 1.0, 1.0}});
  CHECK_THROWS_AS(dispersion(p, -3, 16), ValidationError);
}
