#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "henon/quadratic.hpp"
#include "henon/renorm.hpp"

using namespace henon;

namespace {

HenonFamily dissipative() { return HenonFamily::quadratic(CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(0.3)); }

// (y, y^2 - 3/4 - t x): fixed point (1/2, 1/2) at t = -2 with multipliers 2 and -1.
HenonFamily semi_family() { return HenonFamily::quadratic(CPoly(-0.75), CPoly(std::vector<cplx>{0.0, 1.0})); }

Point saddle(cplx t) {
  const cplx y = fixed_points(0.3, t).plus;
  return {y, y};
}

}  // namespace

TEST_CASE("fixed point continuation follows the closed form") {
  const auto f = dissipative();
  const auto samples = continue_fixed_point(f, -2.0, saddle(-2.0), 0.05);
  CHECK(samples.size() == 1 + 16 * 4);
  for (const auto& s : samples) {
    CHECK(s.residual <= 1e-12);
    CHECK(norm_max(s.z - saddle(s.t)) <= 1e-10);
  }
}

TEST_CASE("constant family continues to a constant") {
  const auto f = HenonFamily::quadratic(CPoly(-2.0), CPoly(0.3));
  const auto samples = continue_fixed_point(f, 0.0, saddle(-2.0), 0.5);
  for (const auto& s : samples) CHECK(norm_max(s.z - samples[0].z) <= 1e-14);
}

TEST_CASE("continuation stops at the parabolic parameter") {
  const auto f = dissipative();
  // Fixed points collide at t = (1 + delta)^2 / 4 = 0.4225.
  CHECK_THROWS_AS(continue_fixed_point(f, 0.3, saddle(0.3), 0.2), EigenvalueOne);
  CHECK_NOTHROW(continue_fixed_point(f, 0.3, saddle(0.3), 0.1));
  const cplx tc = 1.69 / 4.0;
  CHECK_THROWS_AS(continue_fixed_point(f, tc, saddle(tc), 0.01), EigenvalueOne);
  CHECK_THROWS_AS(continue_fixed_point(f, 0.3, {0.0, 0.0}, 0.1), NotPeriodic);
}

TEST_CASE("linear map has a linear unstable parametrization") {
  const auto rho = unstable_parametrization(CMat2{2.0, 0.0, 0.0, 0.5}, 6, 0.5);
  CHECK(rho.u == cplx(2.0));
  CHECK(rho.coeffs[1].x == cplx(1.0));
  CHECK(rho.coeffs[1].y == cplx(0.0));
  for (std::size_t k = 2; k < rho.coeffs.size(); ++k) CHECK(norm_max(rho.coeffs[k]) == 0.0);
  CHECK(rho.defect == 0.0);
}

TEST_CASE("unstable parametrization satisfies the invariance equation") {
  const auto f = dissipative();
  const auto rho = unstable_parametrization(f, -2.0, saddle(-2.0), 20);
  CHECK(rho.defect <= 1e-8);
  CHECK(rho.w_test > 1e-3);
  const Point e = rho.coeffs[1];
  CHECK(std::abs(std::norm(e.x) + std::norm(e.y) - 1.0) <= 1e-15);
  CHECK(e.x.imag() == 0.0);
  CHECK(e.x.real() > 0.0);
  CHECK(parametrization_defect(f, rho, rho.w_test) == doctest::Approx(rho.defect));

  // Order 1: the defect is the quadratic term, so halving w_test quarters it.
  const auto lin = unstable_parametrization(f, -2.0, saddle(-2.0), 1, 1e-3);
  const double a = parametrization_defect(f, lin, 1e-3), b = parametrization_defect(f, lin, 5e-4);
  CHECK(a / b == doctest::Approx(4.0).epsilon(1e-3));
  CHECK_THROWS_AS(unstable_parametrization(f, -2.0, saddle(-2.0), 0), PreconditionFailed);
}

TEST_CASE("quad marked points shift and round trip") {
  const MarkedPoint m{CPoly(std::vector<cplx>{1.0, 2.0, 3.0}), CPoly(std::vector<cplx>{0.5, -1.0})};
  const auto q = QMarkedPoint::from(m, -2.0);
  // a(t) = 1 + 2t + 3t^2 = 9 - 10 (t + 2) + 3 (t + 2)^2
  CHECK(static_cast<cplx>(q.coeffs[0].x) == cplx(9.0));
  CHECK(static_cast<cplx>(q.coeffs[1].x) == cplx(-10.0));
  CHECK(static_cast<cplx>(q.coeffs[2].x) == cplx(3.0));
  const auto back = q.shifted(1.5).to_double();
  CHECK(back.a == m.a);
  CHECK(back.b == m.b);
}

TEST_CASE("fixed point jet matches the derivatives of the closed form") {
  const auto f = dissipative();
  const cplx t0 = -2.0;
  const auto jet = fixed_point_jet(f, t0, saddle(t0), 3);
  const cplx disc = 1.69 - 4.0 * t0;
  const cplx d1 = -1.0 / std::sqrt(disc);
  const cplx d2 = -1.0 / std::pow(disc, 1.5);  // y'' / 2
  CHECK(std::abs(static_cast<cplx>(jet[0].y) - saddle(t0).y) <= 1e-15);
  CHECK(std::abs(static_cast<cplx>(jet[1].y) - d1) <= 1e-15);
  CHECK(std::abs(static_cast<cplx>(jet[2].y) - d2) <= 1e-15);
  CHECK(std::abs(static_cast<cplx>(jet[1].x) - d1) <= 1e-15);
}

TEST_CASE("adapted marked point has stable order p") {
  const auto f = dissipative();
  const auto local = local_fixed_point_data(f, -2.0, saddle(-2.0), 1, 3);
  const auto jet = fixed_point_jet(f, -2.0, local.sigma0, 8);
  const CMat2 a = f.differential(cplx(-2.0), local.sigma0);
  // Stable coordinate after 8 backward steps, where the curvature of W^u no longer contributes.
  auto backward_gap = [&](const QMarkedPoint& sigma, double tau) {
    const QComplex tq = QComplex(-2.0) + QComplex(tau);
    Pair<QComplex> base{}, w{};
    for (int m = static_cast<int>(jet.size()) - 1; m >= 0; --m) {
      base = {base.x * QComplex(tau) + jet[static_cast<std::size_t>(m)].x,
              base.y * QComplex(tau) + jet[static_cast<std::size_t>(m)].y};
    }
    for (int m = static_cast<int>(sigma.coeffs.size()) - 1; m >= 0; --m) {
      w = {w.x * QComplex(tau) + sigma.coeffs[static_cast<std::size_t>(m)].x,
           w.y * QComplex(tau) + sigma.coeffs[static_cast<std::size_t>(m)].y};
    }
    w = w - base;
    for (int k = 0; k < 8; ++k) w = f.deviation_inverse(tq, base, w);
    const Point eu = eigenvector(a, local.u), es = eigenvector(a, local.s);
    const Point coords = solve(CMat2{eu.x, es.x, eu.y, es.y}, {static_cast<cplx>(w.x), static_cast<cplx>(w.y)});
    return std::abs(coords.y);
  };
  for (int p : {2, 3}) {
    const auto sigma = adapted_marked_point(f, local, p);
    CHECK(sigma.coeffs.size() == static_cast<std::size_t>(p));
    const double order = std::log2(backward_gap(sigma, 2e-6) / backward_gap(sigma, 1e-6));
    CHECK(order == doctest::Approx(p).epsilon(0.05));
  }
}

TEST_CASE("globally fixed marked point gives a vanishing sequence") {
  const auto f = dissipative();
  const auto local = local_fixed_point_data(f, -2.0, saddle(-2.0));
  const QMarkedPoint fixed{-2.0, fixed_point_jet(f, -2.0, local.sigma0, 8)};
  RenormOptions opt;
  opt.check_periodicity = false;
  const auto r = renorm_sequence(f, fixed, local, 1e-2, 6, disk_samples(1e-2, 2, 8), opt);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    for (double v : r.values[i]) CHECK(std::abs(v) <= 2.0 * r.max_width[i] + 1e-300);
  }
}

TEST_CASE("globally periodic marked points are rejected") {
  // (y, y^2 + 1.3 t - t^2 - 0.3 x) fixes (t, t) for every t.
  const auto f = HenonFamily::quadratic(CPoly(std::vector<cplx>{0.0, 1.3, -1.0}), CPoly(0.3));
  const MarkedPoint diag{CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(std::vector<cplx>{0.0, 1.0})};
  const auto local = local_fixed_point_data(f, 2.0, {2.0, 2.0});
  CHECK_THROWS_AS(renorm_sequence(f, QMarkedPoint::from(diag, 0.0), local, 1e-2, 4, disk_samples(1e-2, 1, 4)),
                  PreconditionFailed);

  // (y, y^2 + 1/4 + t/2 - t x) fixes (1/2, 1/2) for every t.
  const auto g = HenonFamily::quadratic(CPoly(std::vector<cplx>{0.25, 0.5}), CPoly(std::vector<cplx>{0.0, 1.0}));
  const MarkedPoint half{CPoly(0.5), CPoly(0.5)};
  const auto semi = local_fixed_point_data(g, -2.0, {0.5, 0.5});
  CHECK_THROWS_AS(
      semi_repelling_sequence(g, QMarkedPoint::from(half, 0.0), semi, 2.0, 1e-2, 4, disk_samples(1e-2, 1, 4)),
      PreconditionFailed);
}

TEST_CASE("sequence agrees with a direct double evaluation at small n") {
  const auto f = dissipative();
  const auto local = local_fixed_point_data(f, -2.0, saddle(-2.0), 1, 3);
  const auto sigma = adapted_marked_point(f, local, 3);
  const auto samples = disk_samples(1e-2, 2, 6);
  RenormOptions opt;
  opt.n_min = 0;
  const auto r = renorm_sequence(f, sigma, local, 1e-2, 2, samples, opt);
  const MarkedPoint sd = sigma.to_double();
  GreenOptions g;
  g.max_iter = 200;
  g.tol = 1e-14;
  for (int n = 0; n <= 2; ++n) {
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const cplx t = -2.0 + samples[k] / std::pow(local.lambda_u, n);
      const double direct = std::pow(2.0, n) * green(f, t, sd(t), Sign::Plus, g).mid();
      CHECK(std::abs(r.values[static_cast<std::size_t>(n)][k] - direct) <= 1e-10);
    }
  }
}

TEST_CASE("saddle experiment converges and reproduces the archive") {
  const auto r = saddle_experiment();
  CHECK(r.n_max == 20);
  CHECK_FALSE(r.truncated_at.has_value());
  CHECK(r.fitted_ratio < 0.9);
  CHECK(r.backward_sup.back() <= 1e-3);
  for (double d : r.sup_diffs) CHECK(d >= 0.0);
  for (double w : r.max_width) CHECK(w <= 1e-8);
  CHECK(std::abs(r.fit_constant_a - 1.0) <= 1e-6);
  CHECK(r.fit_residual <= 1e-8);

  std::ifstream in(std::string(HENON_TEST_DATA) + "/renorm_saddle.json");
  REQUIRE(in.good());
  std::stringstream archived;
  archived << in.rdbuf();
  CHECK(to_json(r).dump(1) + "\n" == archived.str());
  CHECK(to_json(saddle_experiment(3)) == to_json(r));
}

TEST_CASE("semi-repelling experiment") {
  const auto r = semi_experiment();
  CHECK(r.kind == "semi");
  CHECK(r.nonconstancy > 0.0);
  CHECK(r.fitted_ratio < 0.9);
  for (std::size_t i = 1; i < r.backward_sup.size(); ++i) CHECK(r.backward_sup[i] < r.backward_sup[i - 1]);

  const auto f = semi_family();
  const auto local = local_fixed_point_data(f, -2.0, {0.5, 0.5}, 1, 3);
  const auto sigma = adapted_marked_point(f, local, 3);
  CHECK_THROWS_AS(renorm_sequence(f, sigma, local, 1e-2, 4, disk_samples(1e-2, 1, 4)), PreconditionFailed);
  const auto d = dissipative();
  const auto sl = local_fixed_point_data(d, -2.0, saddle(-2.0), 1, 3);
  CHECK_THROWS_AS(semi_repelling_sequence(d, adapted_marked_point(d, sl, 3), sl, sl.u, 1e-2, 4,
                                          disk_samples(1e-2, 1, 4)),
                  PreconditionFailed);
}

TEST_CASE("geometric ratio and outputs") {
  std::vector<double> d;
  for (int n = 0; n < 10; ++n) d.push_back(3.0 * std::pow(0.5, n));
  CHECK(geometric_ratio(d) == doctest::Approx(0.5).epsilon(1e-12));
  d[4] = 0.0;
  CHECK(geometric_ratio(d) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::isnan(geometric_ratio({1.0})));

  const auto rho = unstable_parametrization(dissipative(), -2.0, saddle(-2.0), 3);
  std::ostringstream out;
  write_series_csv(out, rho);
  CHECK(out.str().rfind("k,x_re,x_im,y_re,y_im\n0,", 0) == 0);
  const auto j = to_json(semi_experiment());
  CHECK(j["kind"] == "semi");
  CHECK(j["n_range"][1] == 16);
  CHECK(j["truncated_at"].is_null());
}
