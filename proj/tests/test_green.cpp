#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "henon/green.hpp"

using namespace henon;

namespace {

const HenonFamily& quad() {
  static const HenonFamily f = HenonFamily::quadratic_t(cplx(0.5));
  return f;
}

// Reference G+ by plain iteration in long double until |y| is huge, no filtration.
double reference_green_plus(cplx t, Point z, int n) {
  std::complex<long double> x = z.x, y = z.y;
  const std::complex<long double> tl = t;
  long double scale = 1.0L;
  for (int k = 0; k < n; ++k) {
    auto ny = y * y + tl - 0.5L * x;
    x = y;
    y = ny;
    scale *= 2.0L;
    if (std::abs(y) > 1e200L) break;
  }
  return static_cast<double>(std::log(std::max(std::abs(x), std::abs(y))) / scale);
}

}  // namespace

TEST_CASE("escape radius and tail constant") {
  auto e = escape_data(quad(), 0.0);
  CHECK(e.radius == doctest::Approx(3.0));
  CHECK(e.tail_constant == doctest::Approx(std::log(2.5)));
  auto tiny = HenonFamily::quadratic(CPoly(), CPoly(cplx(1e-6)));
  CHECK(escape_data(tiny, 0.0).radius == doctest::Approx(2.0 * (1.0 + 1e-6)));
  auto w = evaluate(quad(), 0.0, {0.0, 10.0});
  CHECK(w == Point{10.0, 100.0});
  CHECK(norm_max(w) >= 20.0);
}

TEST_CASE("fixed point has zero Green function") {
  GreenOptions opt;
  opt.max_iter = 40;
  auto g = green(quad(), 0.0, {1.5, 1.5}, Sign::Plus, opt);
  CHECK(g.lower == 0.0);
  CHECK(g.upper <= 1e-9);
  CHECK_FALSE(g.escaped_at.has_value());
  auto gm = green_max(quad(), 0.0, {1.5, 1.5}, opt);
  CHECK(gm.upper <= 1e-9);
  CHECK(filled_julia_test(quad(), 0.0, {1.5, 1.5}, 1e-9, opt) == JuliaMembership::Inside);
}

TEST_CASE("far field forward escape") {
  auto g = green(quad(), 0.0, {0.0, 1e10}, Sign::Plus);
  REQUIRE(g.escaped_at.has_value());
  CHECK(g.lower > 0.0);
  CHECK(g.width() <= 2e-9);
  CHECK(std::abs(g.mid() - 23.0259) <= 0.01);
  CHECK(std::abs(g.mid() - reference_green_plus(0.0, {0.0, 1e10}, 60)) <= 1e-6);
  CHECK(filled_julia_test(quad(), 0.0, {0.0, 1e10}) == JuliaMembership::Outside);
}

TEST_CASE("far field backward escape") {
  auto e = escape_data(quad(), 0.0);
  auto g = green(quad(), 0.0, {0.0, 1e10}, Sign::Minus);
  REQUIRE(g.escaped_at.has_value());
  CHECK(g.lower >= std::log(1e10) / 2.0 - e.tail_constant_minus);
  // x' = (y^2 - x)/delta for a point with |x| large is the natural far-field seed.
  auto gx = green(quad(), 0.0, {1e10, 0.0}, Sign::Minus);
  CHECK(std::abs(gx.mid() - (std::log(1e10) + std::log(2.0))) <= 0.01);
}

TEST_CASE("green_max is the interval max") {
  // Forward escaping, backward bounded: the inverse image of the basin at infinity.
  const Point z{0.0, 1e3};
  auto gp = green(quad(), 0.0, z, Sign::Plus);
  auto gmm = green(quad(), 0.0, z, Sign::Minus);
  auto gm = green_max(quad(), 0.0, z);
  CHECK(gm.lower == std::max(gp.lower, gmm.lower));
  CHECK(gm.upper == std::max(gp.upper, gmm.upper));
  auto same = enclosure_max(gp, gp);
  CHECK(same.lower == gp.lower);
  CHECK(same.upper == gp.upper);
  auto ab = enclosure_max(gp, gmm), ba = enclosure_max(gmm, gp);
  CHECK(ab.lower == ba.lower);
  CHECK(ab.upper == ba.upper);
}

TEST_CASE("unknown verdict with too few iterations") {
  GreenOptions opt;
  opt.max_iter = 1;
  CHECK(filled_julia_test(quad(), 0.0, {0.1, 0.1}, 1e-9, opt) == JuliaMembership::Unknown);
}

TEST_CASE("functional equations on escaping points") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  const cplx t(-0.3, 0.2);
  auto e = escape_data(quad(), t);
  int checked = 0;
  while (checked < 100) {
    const Point z{cplx(u(rng), u(rng)), cplx(u(rng), u(rng))};
    auto g = green(quad(), e, t, z, Sign::Plus);
    auto g1 = green(quad(), e, t, evaluate(quad(), t, z), Sign::Plus);
    if (g.lower > 0.0) {
      CHECK(std::abs(g1.mid() - 2.0 * g.mid()) <= 3.0 * (g.width() + g1.width()) + 1e-12);
      ++checked;
    }
    auto h = green(quad(), e, t, z, Sign::Minus);
    auto h1 = green(quad(), e, t, evaluate(quad(), t, z), Sign::Minus);
    if (h.lower > 0.0 && h1.lower > 0.0) {
      CHECK(std::abs(h1.mid() - h.mid() / 2.0) <= 3.0 * (h.width() + h1.width()) + 1e-12);
    }
    CHECK(g.lower >= 0.0);
    CHECK(g.lower <= g.upper);
    CHECK(g.escaped_at.has_value() == (g.lower > 0.0));
  }
}

TEST_CASE("refining max_iter keeps enclosures nested") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    const Point z{cplx(u(rng), u(rng)), cplx(u(rng), u(rng))};
    GreenOptions a, b;
    a.max_iter = 8;
    b.max_iter = 64;
    auto ga = green(quad(), 0.1, z, Sign::Plus, a);
    auto gb = green(quad(), 0.1, z, Sign::Plus, b);
    CHECK(gb.lower >= ga.lower - ga.width());
    CHECK(gb.upper <= ga.upper + ga.width());
  }
}

TEST_CASE("continuity probe on a collinear sample") {
  const Point a{0.0, 1.0}, b{0.0, 3.0};
  const Point mid{0.0, 2.0};
  const double ga = green_max(quad(), 0.0, a).mid(), gb = green_max(quad(), 0.0, b).mid();
  CHECK(green_max(quad(), 0.0, mid).mid() <= std::max(ga, gb) + 0.5);
}

TEST_CASE("multi-factor families escape and satisfy the functional equation") {
  HenonFactor a;
  a.p = {CPoly(cplx(0.2)), CPoly(), CPoly(cplx(1.0))};
  a.delta = CPoly(cplx(0.4));
  HenonFactor b;
  b.p = {CPoly(cplx(-0.3, 0.1)), CPoly(cplx(0.5)), CPoly(), CPoly(cplx(1.0))};
  b.delta = CPoly(cplx(-0.8));
  HenonFamily f(std::vector<HenonFactor>{a, b});
  const Point z{0.3, 2.9};
  auto g = green(f, 0.0, z, Sign::Plus);
  auto g1 = green(f, 0.0, evaluate(f, 0.0, z), Sign::Plus);
  REQUIRE(g.lower > 0.0);
  CHECK(std::abs(g1.mid() - 6.0 * g.mid()) <= 3.0 * (g.width() + g1.width()));
}

TEST_CASE("render writes a 16-bit PGM and sidecar") {
  PlaneSlice slice;
  const Rect r{-2.0, 2.0, -2.0, 2.0};
  auto one = render_green(quad(), 0.0, slice, r, 16, 12, {}, 1);
  auto many = render_green(quad(), 0.0, slice, r, 16, 12, {}, 3);
  CHECK(one.grid.values == many.grid.values);
  const auto dir = std::filesystem::temp_directory_path() / "henon_green_test";
  std::filesystem::create_directories(dir);
  write_pgm16(one, dir / "g.pgm", dir / "g.json");
  std::ifstream in(dir / "g.pgm", std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  CHECK(magic == "P5");
  CHECK(w == 16);
  CHECK(h == 12);
  CHECK(maxv == 65535);
  CHECK(std::filesystem::file_size(dir / "g.pgm") >= 16u * 12u * 2u);
  CHECK(std::filesystem::exists(dir / "g.json"));
}
