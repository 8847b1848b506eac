#include <cmath>
#include <sstream>

#include "doctest.h"
#include "henon/curves.hpp"
#include "henon/measures.hpp"

using namespace henon;

namespace {

HenonFamily conservative() { return HenonFamily::quadratic(CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(cplx(-1.0))); }

CurveFamily antidiagonal() { return CurveFamily::line(1.0, 0.0, -1.0, 0.0, Rect{-3, 3, -3, 3}); }

}  // namespace

TEST_CASE("bivariate polynomials and curve images") {
  const BiPoly t = BiPoly::from_t(CPoly(std::vector<cplx>{0.0, 1.0}));
  const BiPoly p = BiPoly::w() * BiPoly::w() + t * BiPoly::w() - BiPoly::from_t(CPoly(cplx(3.0)));
  const cplx tv(0.3, -1.2), wv(-0.7, 0.4);
  CHECK(std::abs(p(tv, wv) - (wv * wv + tv * wv - 3.0)) < 1e-14);
  CHECK(std::abs(p.dw(tv, wv) - (2.0 * wv + tv)) < 1e-14);

  auto f = HenonFamily::quadratic_t(cplx(0.5));
  const CurveFamily c{BiPoly::w(), BiPoly::w() * BiPoly::w() + t, Rect{}};
  const CurveFamily fc = image(f, c);
  const Point direct = f.apply(tv, c.at(tv, wv));
  const Point via = fc.at(tv, wv);
  CHECK(std::abs(direct.x - via.x) < 1e-13);
  CHECK(std::abs(direct.y - via.y) < 1e-13);
}

TEST_CASE("non-injective parameterization is rejected") {
  const CurveFamily c{BiPoly::w() * BiPoly::w(), BiPoly::w() * BiPoly::w() * BiPoly::w() * BiPoly::w(),
                      Rect{-1, 1, -1, 1}};
  CHECK_THROWS_AS(check_injective(c, {0.0}, 16), InjectivityViolation);
  CHECK_THROWS_AS(fiber_energy(conservative(), c, 0.0, 16), InjectivityViolation);
  CHECK_NOTHROW(check_injective(antidiagonal(), {0.0, 1.0}, 16));
}

TEST_CASE("symmetric line has G+ equal to G- after the involution") {
  for (cplx t : {cplx(0.0), cplx(1.0), cplx(0.0, 1.0)}) {
    CHECK(symmetry_defect(conservative(), antidiagonal(), t, 64) <= 1e-6);
  }
}

TEST_CASE("degenerate fiber energy decreases with resolution") {
  for (cplx t : {cplx(0.0), cplx(1.0)}) {
    const FiberEnergy a = fiber_energy(conservative(), antidiagonal(), t, 128);
    const FiberEnergy b = fiber_energy(conservative(), antidiagonal(), t, 512);
    CHECK(a.boundary_flag);
    CHECK(b.boundary_flag);
    CHECK(b.value < 0.6 * a.value);
    CHECK(b.value < 2e-2);
  }
}

TEST_CASE("offset line has positive fiber energy") {
  auto f = HenonFamily::quadratic_t(cplx(0.5));
  const auto line = CurveFamily::line(1.0, 0.0, 1.0, 5.0, Rect{-8, 8, -8, 8});
  const FiberEnergy e = fiber_energy(f, line, 0.0, 128);
  CHECK(e.boundary_flag);
  CHECK(e.value > 1.0);
}

TEST_CASE("profile masses") {
  ValueGrid zero{Rect{-1, 1, -1, 1}, 16, 16, std::vector<double>(256, 0.0)};
  CHECK(profile_mass(zero) == 0.0);
  ValueGrid logt{Rect{-1, 1, -1, 1}, 512, 512, std::vector<double>(512 * 512)};
  for (int j = 0; j < 512; ++j) {
    for (int i = 0; i < 512; ++i) logt.at(i, j) = std::log(std::abs(logt.node(i, j)));
  }
  CHECK(profile_mass(logt) == doctest::Approx(1.0).epsilon(0.02));
  ValueGrid thin{Rect{0, 0, -1, 1}, 8, 8, std::vector<double>(64, 1.0)};
  CHECK(profile_mass(thin) == 0.0);
}

TEST_CASE("nondegeneracy probe verdicts") {
  const auto line = CurveFamily::line(1.0, 0.0, 1.0, 0.3, Rect{-4, 4, -4, 4});
  auto v = nondegeneracy_probe(conservative(), line, {Rect{-2, 2, -2, 2}}, 8, 64);
  CHECK(v.nonzero);
  CHECK(v.value > 1e-2);
  auto z = nondegeneracy_probe(conservative(), line, {Rect{0.5, 0.5, -1, 1}}, 8, 64);
  CHECK_FALSE(z.nonzero);
  CHECK(z.value == doctest::Approx(1e-2));
}

TEST_CASE("excluded parameters in the window are rejected") {
  auto f = HenonFamily::quadratic(CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(std::vector<cplx>{0.0, 1.0}));
  CHECK_THROWS_AS(energy_profile(f, antidiagonal(), Rect{-1, 1, -1, 1}, 4, 8), DegenerateParameter);
}

TEST_CASE("distance from fibers to the eight points") {
  const cplx delta = 0.5;
  const auto line = CurveFamily::line(1.0, 0.0, 1.0, 5.0, Rect{-60, 60, -60, 60});
  const std::vector<cplx> ts{100.0, cplx(0.0, 100.0), -400.0, cplx(300.0, 300.0)};
  const auto rep = sigma_distance_check(line, delta, ts, 3.0);
  REQUIRE(rep.distances.size() == ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) {
    // Oracle: distance from p to {(w, w + 5)} is |p_y - p_x - 5| / sqrt 2.
    const cplx s = std::sqrt((1.0 + delta) * (1.0 + delta) - 4.0 * ts[k]);
    double best = 1e300;
    for (cplx y : {(1.0 + delta + s) / 2.0, (1.0 + delta - s) / 2.0}) {
      for (auto [px, py] : {std::pair{y, y}, {y - delta, y}, {y, y - 1.0}, {y - delta, y - 1.0}}) {
        best = std::min(best, std::abs(py - px - 5.0) / std::sqrt(2.0));
      }
    }
    CHECK(rep.distances[k] == doctest::Approx(best).epsilon(1e-9));
    CHECK(rep.distances[k] == doctest::Approx(4.5 / std::sqrt(2.0)).epsilon(1e-9));
  }
  CHECK(rep.pass);
  CHECK_FALSE(sigma_distance_check(line, delta, ts, 4.0).pass);

  const auto diag = CurveFamily::line(1.0, 0.0, 1.0, 0.0, Rect{-60, 60, -60, 60});
  const auto bad = sigma_distance_check(diag, delta, ts, 1e-6);
  CHECK_FALSE(bad.pass);
  for (double d : bad.distances) CHECK(d < 1e-9);

  const auto empty = sigma_distance_check(line, delta, {}, 1.0);
  CHECK(empty.pass);
  CHECK(empty.vacuous);
}

TEST_CASE("curve json roundtrip and profile csv") {
  auto f = HenonFamily::quadratic_t(cplx(0.5));
  const auto c = image(f, CurveFamily::line(1.0, 0.5, cplx(0, 2), -1.0, Rect{-2, 3, -1, 1}));
  const auto back = curve_from_json(curve_to_json(c));
  CHECK(back.x == c.x);
  CHECK(back.y == c.y);
  CHECK(back.w_domain.re_max == 3.0);
  CHECK_THROWS_AS(curve_from_json(nlohmann::json::parse(R"({"x": 3, "y": []})")), InvalidFamily);

  const auto p = energy_profile(f, CurveFamily::line(1.0, 0.0, 1.0, 5.0, Rect{-8, 8, -8, 8}), Rect{-1, 1, -1, 1}, 3,
                                16);
  std::ostringstream os;
  write_profile_csv(os, p);
  CHECK(os.str().rfind("t_re,t_im,value,boundary_flag\n", 0) == 0);
}

TEST_CASE("windowed mass is invariant under one iterate of the curve") {
  const auto line = CurveFamily::line(1.0, 0.0, 1.0, 0.3, Rect{-4, 4, -4, 4});
  const Rect window{-1, 1, -1, 1};
  const double a = family_height(conservative(), line, window, 24, 96);
  const double b = family_height(conservative(), image(conservative(), line), window, 24, 96);
  CHECK(a > 0.05);
  CHECK(std::abs(a - b) <= 0.05 * a);
}
