#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "topoband/interface.hpp"
#include "topoband/perturbation.hpp"

using namespace topoband;
using Catch::Approx;

namespace {

struct Setup {
  MediumProfile hom = make_layered({{1.0, 1.0, 1.0}}, "vacuum");
  PerturbationProfile q = PerturbationProfile::from_pieces(
      {{0.5, Coefficient::constant(1.0), Coefficient::constant(0.0)},
       {0.5, Coefficient::constant(-1.0), Coefficient::constant(0.0)}});
  DiracPoint dp;

  Setup() { dp = find_dirac_points(hom, 50.0).points.front(); }
};

const Setup& setup() {
  static Setup s;
  return s;
}

}  // namespace

TEST_CASE("hessian coefficients of the step perturbation at pi^2", "[perturbation]") {
  // Closed forms for eps~ = +-1 on the two half cells, mu~ = 0, E* = pi^2:
  // p1 = 0, q1 = 1/(2 pi^2), r1 = 1/2, p2 = 1, q2 = r2 = 0.
  const auto& s = setup();
  auto h = hessian_coeffs(s.hom, s.q, s.dp);
  CHECK(std::abs(h.p1) < 1e-12);
  CHECK(h.q1 == Approx(1.0 / (2.0 * kPi * kPi)).epsilon(1e-7));
  CHECK(h.r1 == Approx(0.5).epsilon(1e-7));
  CHECK(h.p2 == Approx(1.0).epsilon(1e-5));
  CHECK(std::abs(h.q2) < 1e-6);
  CHECK(std::abs(h.r2) < 1e-6);
  CHECK(h.a1 == Approx(-1.0 / (2.0 * kPi * kPi)).epsilon(1e-5));
  CHECK(std::abs(h.a2) < 1e-10);
  CHECK(h.a3 == Approx(2.0).epsilon(1e-5));
  // beta aliases mirror the first-order block.
  CHECK(h.beta1 == h.p1);
  CHECK(h.beta2 == h.q1);
  // The finite-difference cross-check agrees (it is also enforced in-op).
  CHECK(h.fd_a1 == Approx(h.a1).epsilon(1e-3));
  CHECK(h.fd_a3 == Approx(h.a3).epsilon(1e-3));
  CHECK(std::abs(h.fd_a2 - h.a2) < 1e-3 * (std::abs(h.a1) + std::abs(h.a3)));
}

TEST_CASE("assumption check separates eps-driven from mu-driven steps", "[perturbation]") {
  const auto& s = setup();
  auto h = hessian_coeffs(s.hom, s.q, s.dp);
  auto a = check_assumption1(h);
  CHECK(a.satisfied);
  CHECK(a.branch == 1);

  // A pure-mu constant perturbation fails: p2 = 0, q2 = 1/2, r2 = pi^2/2.
  auto qmu = PerturbationProfile::from_pieces(
      {{1.0, Coefficient::constant(0.0), Coefficient::constant(1.0)}});
  auto hmu = hessian_coeffs(s.hom, qmu, s.dp);
  CHECK(std::abs(hmu.p2) < 1e-6);
  CHECK(hmu.q2 == Approx(0.5).epsilon(1e-6));
  CHECK(hmu.r2 == Approx(0.5 * kPi * kPi).epsilon(1e-6));
  CHECK_FALSE(check_assumption1(hmu).satisfied);
}

TEST_CASE("gap_prediction gives eta = -+2 pi for the step", "[perturbation]") {
  const auto& s = setup();
  auto g = gap_prediction(s.hom, s.q, s.dp);
  CHECK(g.e_star == Approx(kPi * kPi).epsilon(1e-7));
  CHECK(g.eta_minus == Approx(-2.0 * kPi).epsilon(1e-5));
  CHECK(g.eta_plus == Approx(2.0 * kPi).epsilon(1e-5));
  auto [lo, hi] = g.edges(0.01);
  CHECK(lo == Approx(kPi * kPi - 0.02 * kPi).epsilon(1e-6));
  CHECK(hi == Approx(kPi * kPi + 0.02 * kPi).epsilon(1e-6));
}

TEST_CASE("predicted edges converge to the measured gap at second order", "[perturbation]") {
  const auto& s = setup();
  auto g = gap_prediction(s.hom, s.q, s.dp);
  std::vector<double> ld, el, eh;
  for (double delta : {1e-2, 5e-3, 2.5e-3}) {
    auto pp = apply_perturbation(s.hom, s.q, delta);
    auto set = band_edges_for(pp, 2);
    auto [plo, phi] = g.edges(delta);
    double lo = set.bands[0].e_plus, hi = set.bands[1].e_minus;
    CHECK(std::abs(lo - plo) < 5e-4);
    CHECK(std::abs(hi - phi) < 5e-4);
    ld.push_back(std::log(delta));
    el.push_back(std::log(std::abs(lo - plo)));
    eh.push_back(std::log(std::abs(hi - phi)));
  }
  // Remainder is O(delta^2); the fitted exponent lands close to 2.
  CHECK(least_squares(ld, el).slope > 1.8);
  CHECK(least_squares(ld, eh).slope > 1.8);
}

TEST_CASE("dirac_interface_mode pins the junction mode near E*", "[perturbation]") {
  const auto& s = setup();
  for (double delta : {0.01, 0.005}) {
    auto r = dirac_interface_mode(s.hom, s.q, delta, s.dp);
    CHECK(r.delta == delta);
    CHECK(r.assumption.satisfied);
    CHECK(r.mode.residual < 1e-6);
    CHECK(r.mode.energy > r.predicted_lo);
    CHECK(r.mode.energy < r.predicted_hi);
    // Independent route: matching-determinant search on the same junction.
    auto left = apply_perturbation(s.hom, s.q, -delta);
    auto right = apply_perturbation(s.hom, s.q, delta);
    auto direct = find_interface_modes(left, right, 2.0 * s.dp.e_star);
    bool matched = false;
    for (const auto& m : direct)
      if (std::abs(m.energy - r.mode.energy) < 1e-8) matched = true;
    CHECK(matched);
  }
}

TEST_CASE("frozen mode location at delta = 0.01", "[perturbation]") {
  const auto& s = setup();
  auto r = dirac_interface_mode(s.hom, s.q, 0.01, s.dp);
  CHECK(r.mode.energy == Approx(9.8693576751).epsilon(1e-7));
  CHECK(r.mode.omega == Approx(std::sqrt(9.8693576751)).epsilon(1e-7));
}

TEST_CASE("dirac_context recertifies the Dirac point", "[perturbation]") {
  const auto& s = setup();
  DiracPoint wrong = s.dp;
  wrong.e_star = 10.0;  // not a Dirac energy: ||M - sigma Id|| is order 1
  CHECK_THROWS_AS(dirac_context(s.hom, s.q, wrong), NumericalError);
}

TEST_CASE("gap_prediction refuses a vanishing quadratic", "[perturbation]") {
  const auto& s = setup();
  auto z =
      PerturbationProfile::from_pieces({{1.0, Coefficient::constant(0.0), Coefficient::constant(0.0)}});
  CHECK_THROWS_AS(gap_prediction(s.hom, z, s.dp), std::runtime_error);
}
