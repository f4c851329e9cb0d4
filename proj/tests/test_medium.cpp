#include <catch2/catch_amalgamated.hpp>

#include "topoband/medium.hpp"

using namespace topoband;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("parse_structure reads the layered form", "[medium]") {
  auto p = parse_structure(R"({"layers":[{"w":0.42,"eps":3.8},{"w":0.58}],"label":"cell"})");
  REQUIRE(p.pieces.size() == 2);
  CHECK(p.label == "cell");
  CHECK(p.eps(0.2) == 3.8);
  CHECK(p.eps(0.9) == 1.0);  // eps defaults to 1
  CHECK(p.mu(0.2) == 1.0);
  auto bp = p.breakpoints();
  REQUIRE(bp.size() == 3);
  CHECK(bp[1] == Approx(0.42));
  CHECK(bp.back() == 1.0);  // rounding residue is absorbed so the cell ends at 1 exactly
}

TEST_CASE("parse_structure applies origin_shift", "[medium]") {
  auto p = parse_structure(
      R"({"layers":[{"w":0.42,"eps":3.8},{"w":0.58,"eps":1.0}],"origin_shift":0.42})");
  // Shifted profile starts where the original low-eps layer started.
  CHECK(p.eps(0.1) == Approx(1.0));
  CHECK(p.eps(0.7) == Approx(3.8));
}

TEST_CASE("parse_structure rejects malformed input with a field path", "[medium]") {
  CHECK_THROWS_AS(parse_structure("not json"), ValidationError);
  CHECK_THROWS_AS(parse_structure(R"([1,2,3])"), ValidationError);
  CHECK_THROWS_WITH(parse_structure(R"({"layers":[]})"), ContainsSubstring("structure.layers"));
  CHECK_THROWS_WITH(parse_structure(R"({"layers":[{"w":-0.5},{"w":1.5}]})"),
                    ContainsSubstring("layers[0].w"));
  CHECK_THROWS_WITH(parse_structure(R"({"layers":[{"w":0.4,"eps":-2},{"w":0.6}]})"),
                    ContainsSubstring("must be positive"));
  CHECK_THROWS_WITH(parse_structure(R"({"layers":[{"w":0.4},{"w":0.7}]})"),
                    ContainsSubstring("sum to 1"));
  CHECK_THROWS_WITH(parse_structure(R"({"layers":[{"w":1.0,"eps":{"grid":[1.0]}}]})"),
                    ContainsSubstring("grid"));
}

TEST_CASE("sampled coefficients interpolate linearly inside a piece", "[medium]") {
  auto p = parse_structure(R"({"layers":[{"w":1.0,"eps":{"grid":[2.0,4.0]}}]})");
  CHECK(p.eps(0.0) == Approx(2.0));
  CHECK(p.eps(0.5) == Approx(3.0));
  CHECK(p.eps(0.25) == Approx(2.5));
}

TEST_CASE("structure serialization round-trips", "[medium]") {
  auto p = parse_structure(R"({"layers":[{"w":0.3,"eps":2.5,"mu":1.2},{"w":0.7}],"label":"x"})");
  auto q = parse_structure(serialize_structure(p));
  REQUIRE(q.pieces.size() == p.pieces.size());
  CHECK(q.label == p.label);
  for (double x : {0.1, 0.25, 0.4, 0.8}) {
    CHECK(q.eps(x) == Approx(p.eps(x)));
    CHECK(q.mu(x) == Approx(p.mu(x)));
  }
}

TEST_CASE("make_layered normalizes widths to one period", "[medium]") {
  auto p = make_layered({{1.0, 2.0, 1.0}, {2.0, 1.0, 1.0}, {1.0, 2.0, 1.0}});
  REQUIRE(p.pieces.size() == 3);
  CHECK(p.pieces[0].width == Approx(0.25));
  CHECK(p.pieces[1].width == Approx(0.5));
  double total = 0.0;
  for (const auto& piece : p.pieces) total += piece.width;
  CHECK(total == 1.0);
}

TEST_CASE("shift_origin translates the profile periodically", "[medium]") {
  auto p = make_layered({{0.42, 3.8, 1.0}, {0.58, 1.0, 1.0}});
  auto s = shift_origin(p, 0.42);
  for (double x : {0.05, 0.3, 0.55, 0.61, 0.9}) {
    double y = x + 0.42;
    y -= std::floor(y);
    CHECK(s.eps(x) == Approx(p.eps(y)));
  }
  // Shifting to a layer midpoint produces an inversion-symmetric cell.
  CHECK_FALSE(is_inversion_symmetric(p));
  CHECK(is_inversion_symmetric(shift_origin(p, 0.21)));
}

TEST_CASE("is_inversion_symmetric detects palindromic cells", "[medium]") {
  auto sym = make_layered({{0.21, 3.8, 1.0}, {0.58, 1.0, 1.0}, {0.21, 3.8, 1.0}});
  auto asym = make_layered({{0.38, 4.2, 1.0}, {0.62, 1.0, 1.0}});
  CHECK(is_inversion_symmetric(sym));
  CHECK_FALSE(is_inversion_symmetric(asym));
}

TEST_CASE("perturbation profiles are sup-normalized", "[medium]") {
  auto q = parse_perturbation(
      R"({"tilde_layers":[{"w":0.5,"eps":3.0,"mu":0.0},{"w":0.5,"eps":0.0,"mu":-1.0}]})");
  CHECK(q.normalization == Approx(4.0));  // sup|eps~| + sup|mu~|
  CHECK(q.pieces[0].eps.value == Approx(0.75));
  CHECK(q.pieces[1].mu.value == Approx(-0.25));
  CHECK_FALSE(q.is_zero());

  auto z = PerturbationProfile::from_pieces(
      {{1.0, Coefficient::constant(0.0), Coefficient::constant(0.0)}});
  CHECK(z.is_zero());
  CHECK_THROWS_WITH(parse_perturbation(R"({"tilde_layers":[{"w":0.5,"eps":1.0}]})"),
                    ContainsSubstring("sum to 1"));
}

TEST_CASE("apply_perturbation adds delta times the normalized profile", "[medium]") {
  auto hom = make_layered({{1.0, 1.0, 1.0}});
  auto q = PerturbationProfile::from_pieces(
      {{0.5, Coefficient::constant(1.0), Coefficient::constant(0.0)},
       {0.5, Coefficient::constant(-1.0), Coefficient::constant(0.0)}});
  auto p = apply_perturbation(hom, q, 0.01);
  CHECK(p.eps(0.25) == Approx(1.01));
  CHECK(p.eps(0.75) == Approx(0.99));
  CHECK(p.mu(0.25) == Approx(1.0));
  // Coefficients must stay positive after perturbing.
  CHECK_THROWS_AS(apply_perturbation(hom, q, 2.0), ValidationError);
}

TEST_CASE("apply_perturbation splits pieces on the merged breakpoint grid", "[medium]") {
  auto p = make_layered({{0.3, 2.0, 1.0}, {0.7, 1.0, 1.0}});
  auto q = PerturbationProfile::from_pieces(
      {{0.5, Coefficient::constant(1.0), Coefficient::constant(0.0)},
       {0.5, Coefficient::constant(0.0), Coefficient::constant(0.0)}});
  auto pp = apply_perturbation(p, q, 0.1);
  auto bp = pp.breakpoints();
  // 0, 0.3, 0.5, 1: cuts of both factors.
  REQUIRE(bp.size() == 4);
  CHECK(bp[1] == Approx(0.3));
  CHECK(bp[2] == Approx(0.5));
  CHECK(pp.eps(0.4) == Approx(1.1));
  CHECK(pp.eps(0.6) == Approx(1.0));
}

TEST_CASE("parse_defect validates the gap-filling constraint", "[medium]") {
  auto d = parse_defect(R"({"d1":-0.1,"d2":0.15,"layers":[{"w":0.25,"eps":2.0,"mu":1.5}]})");
  CHECK(d.width() == Approx(0.25));
  REQUIRE(d.layers.size() == 1);
  CHECK(d.layers[0].eps == 2.0);

  CHECK_THROWS_WITH(parse_defect(R"({"d2":0.1,"layers":[]})"), ContainsSubstring("defect.d1"));
  CHECK_THROWS_WITH(parse_defect(R"({"d1":0.1,"d2":0.2,"layers":[{"w":0.1}]})"),
                    ContainsSubstring("d1 <= 0 <= d2"));
  CHECK_THROWS_WITH(parse_defect(R"({"d1":-0.1,"d2":0.1,"layers":[{"w":0.1}]})"),
                    ContainsSubstring("sum to d2 - d1"));
  // Empty defect: no layers, zero width.
  auto e = parse_defect(R"({"d1":0.0,"d2":0.0})");
  CHECK(e.empty());
}
