#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "henon/heights.hpp"

using namespace henon;

namespace {

QPoint qp(mpq_class x, mpq_class y) {
  x.canonicalize();
  y.canonicalize();
  return {x, y};
}

HenonFamily conservative() { return HenonFamily::quadratic_t(mpq_class(-1)); }

}  // namespace

TEST_CASE("naive height of projective points") {
  CHECK(naive_height(qp(0, 0)) == 0.0);
  CHECK(naive_height(qp(mpq_class(3, 2), mpq_class(7, 4))) == doctest::Approx(std::log(7.0)));
  CHECK(naive_height(qp(-12, 0)) == doctest::Approx(std::log(12.0)));
  CHECK(naive_height(mpq_class(-5, 3)) == doctest::Approx(std::log(5.0)));
}

TEST_CASE("fixed point has canonical height exactly zero") {
  auto f = HenonFamily::quadratic_t(mpq_class(1, 2));
  for (auto s : {HeightSign::Plus, HeightSign::Minus, HeightSign::Both}) {
    auto e = canonical_height(f, 0, qp(0, 0), s);
    CHECK(e.periodic);
    CHECK(e.value == 0.0);
    CHECK(e.error == 0.0);
  }
  auto e = canonical_height(f, 0, qp(mpq_class(3, 2), mpq_class(3, 2)), HeightSign::Both);
  CHECK(e.value == 0.0);
  CHECK(e.periodic);
}

TEST_CASE("escaping integer point gives a Cauchy sequence") {
  auto e = canonical_height(conservative(), 0, qp(0, 10), HeightSign::Plus);
  CHECK_FALSE(e.periodic);
  REQUIRE(e.iterations >= 12);
  const auto r = difference_ratios(e, 2);
  for (std::size_t n = 3; n < r.size(); ++n) {
    if (!std::isnan(r[n])) CHECK(r[n] <= 0.5);
  }
  CHECK(e.value > 0.0);
  CHECK(e.error >= 0.0);
  CHECK(e.error < 1e-3);
}

TEST_CASE("forward height scales by the degree under the map") {
  auto f = HenonFamily::quadratic_t(mpq_class(1, 2));
  const mpq_class t(1, 3);
  const QPoint p = qp(mpq_class(2, 5), 3);
  auto hp = canonical_height(f, t, p, HeightSign::Plus);
  auto hfp = canonical_height(f, t, f.apply_exact(t, p), HeightSign::Plus);
  CHECK(std::abs(hfp.value - 2.0 * hp.value) <= 2.0 * hp.error + hfp.error);
  auto mp = canonical_height(f, t, p, HeightSign::Minus);
  auto mfp = canonical_height(f, t, f.apply_exact(t, p), HeightSign::Minus);
  CHECK(std::abs(2.0 * mfp.value - mp.value) <= mp.error + 2.0 * mfp.error);
}

TEST_CASE("tiny bit budget raises") {
  HeightOptions opt;
  opt.bit_budget = 8;
  CHECK_THROWS_AS(canonical_height(conservative(), 0, qp(0, 10), HeightSign::Plus, opt), BitBudgetExceeded);
}

TEST_CASE("floating family is rejected") {
  auto f = HenonFamily::quadratic_t(cplx(0.5));
  CHECK_THROWS_AS(canonical_height(f, 0, qp(0, 10), HeightSign::Plus), BackendMismatch);
}

TEST_CASE("rational seeds contract once the orbit is in the escape region") {
  auto f = conservative();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> num(-9, 9), den(1, 9);
  int checked = 0;
  for (int k = 0; k < 20; ++k) {
    const QPoint p = qp(mpq_class(num(rng), den(rng)), mpq_class(num(rng), den(rng)));
    auto e = canonical_height(f, 0, p, HeightSign::Plus);
    if (e.periodic) continue;
    // First iterate with |y| >= max(|x|, 4), the forward filtration at t = 0.
    std::size_t entry = 0;
    QPoint z = p;
    while (entry < e.defects.size() && !(std::abs(z.y.get_d()) >= std::max(std::abs(z.x.get_d()), 4.0))) {
      z = f.apply_exact(0, z);
      ++entry;
    }
    const auto r = difference_ratios(e, 2);
    for (std::size_t n = std::max<std::size_t>(3, entry); n < r.size(); ++n) {
      if (std::isnan(r[n])) continue;
      CHECK(r[n] <= 0.6);
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("late escape breaks the uniform ratio bound") {
  auto e = canonical_height(conservative(), 0, qp(-1, mpq_class(-1, 2)), HeightSign::Plus);
  const auto r = difference_ratios(e, 2);
  REQUIRE(r.size() > 9);
  CHECK(e.defects[8] == 0.0);
  CHECK(e.defects[9] > 0.3);
  CHECK(std::isinf(r[8]));
}

TEST_CASE("inequality harness reports finite constants") {
  auto f = HenonFamily::quadratic_t(mpq_class(1, 2));
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> num(-4, 4), den(1, 4);
  std::vector<HeightSample> samples;
  for (int k = 0; k < 30; ++k) {
    samples.push_back({mpq_class(num(rng), den(rng)), qp(mpq_class(num(rng), den(rng)), mpq_class(num(rng), den(rng)))});
    samples.back().t.canonicalize();
  }
  HeightOptions opt;
  opt.bit_budget = 1 << 14;
  auto r = inequality_harness(f, samples, opt);
  CHECK(r.used + r.skipped == samples.size());
  CHECK(std::isfinite(r.c1));
  CHECK(std::isfinite(r.c2));
  CHECK(r.c1 >= 0.0);
  auto j = to_json(r);
  CHECK(j["used"].get<std::size_t>() == r.used);
  std::ostringstream os;
  write_height_csv(os, {samples[0]}, {canonical_height(f, samples[0].t, samples[0].p, HeightSign::Both, opt)});
  CHECK(os.str().rfind("t,x,y,value", 0) == 0);
}
