// Runs the eleven acceptance criteria and prints one PASS/FAIL line each.
// Exits 0 once every criterion has reported; --strict exits 1 on any failure.
// Usage: acceptance [--strict] [--out DIR] [ids...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "henon/curves.hpp"
#include "henon/family_io.hpp"
#include "henon/green.hpp"
#include "henon/heights.hpp"
#include "henon/measures.hpp"
#include "henon/periodic.hpp"
#include "henon/quadratic.hpp"
#include "henon/renorm.hpp"

using namespace henon;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kFunctionalFactor = 3.0;
constexpr double kFunctionalWidth = 1e-8;
constexpr double kFixedPointGreen = 1e-9;
constexpr double kCalibration = 0.02;
constexpr double kFiberEnergy = 1e-3;
constexpr double kSymmetry = 1e-6;
constexpr double kWindowHeight = 1e-2;
constexpr double kRtFinal = 1.0;
constexpr double kCauchyRatio = 0.6;
constexpr double kConstantDrift = 0.5;
constexpr double kRenormRatio = 0.9;
constexpr double kBackwardSup = 1e-3;
constexpr double kGammaLow = 0.9, kGammaHigh = 1.1;
constexpr double kPropResidual = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

fs::path g_out = "acceptance_out";

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

HenonFamily quad_half() { return HenonFamily::quadratic_t(cplx(0.5)); }
HenonFamily reversible() { return HenonFamily::quadratic(CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(-1.0)); }

Outcome green_functional() {
  const auto f = quad_half();
  const cplx t = 0.0;
  const auto esc = escape_data(f, t);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  int points = 0, bad = 0;
  double worst = 0.0, widest = 0.0;
  while (points < 100) {
    const Point z{cplx(u(rng), u(rng)), cplx(u(rng), u(rng))};
    const Point fz = evaluate(f, t, z);
    const auto gp = green(f, esc, t, z, Sign::Plus), gp1 = green(f, esc, t, fz, Sign::Plus);
    const auto gm = green(f, esc, t, z, Sign::Minus), gm1 = green(f, esc, t, fz, Sign::Minus);
    if (std::max(gp.lower, gm.lower) <= 0.0) continue;
    ++points;
    const double ep = std::abs(gp1.mid() - 2.0 * gp.mid()), wp = gp.width() + gp1.width();
    const double em = std::abs(gm1.mid() - gm.mid() / 2.0), wm = gm.width() + gm1.width();
    widest = std::max({widest, gp.width(), gp1.width(), gm.width(), gm1.width()});
    worst = std::max({worst, ep / std::max(wp, 1e-300), em / std::max(wm, 1e-300)});
    if (ep > kFunctionalFactor * wp || em > kFunctionalFactor * wm) ++bad;
  }
  return {bad == 0 && widest <= kFunctionalWidth,
          "100 points, worst error/width " + fmt(worst) + ", widest " + fmt(widest) + ", violations " +
              std::to_string(bad)};
}

Outcome fixed_point_vanishing() {
  GreenOptions opt;
  opt.max_iter = 40;
  const auto g = green(quad_half(), 0.0, {1.5, 1.5}, Sign::Plus, opt);
  const auto h = canonical_height(HenonFamily::quadratic_t(mpq_class(1, 2)), 0, {mpq_class(3, 2), mpq_class(3, 2)},
                                  HeightSign::Both);
  return {g.upper <= kFixedPointGreen && h.value == 0.0 && h.error == 0.0,
          "G upper " + fmt(g.upper) + ", height " + fmt(h.value) + " (error " + fmt(h.error) + ")"};
}

Outcome calibration() {
  ValueGrid g{{-1.0, 1.0, -1.0, 1.0}, 512, 512, std::vector<double>(512 * 512)};
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) g.at(i, j) = std::log(std::abs(g.node(i, j)));
  }
  const double mass = laplacian_measure(g).total;
  return {std::abs(mass - 1.0) <= kCalibration, "mass " + fmt(mass)};
}

Outcome degenerate_curve() {
  const auto f = reversible();
  const auto c = CurveFamily::line(1.0, 0.0, -1.0, 0.0, {-4.0, 4.0, -4.0, 4.0});
  CurveOptions opt;
  double energy = 0.0, sym = 0.0;
  for (cplx t : {cplx(0.0), cplx(1.0), cplx(0.0, 1.0)}) {
    energy = std::max(energy, fiber_energy(f, c, t, 1024, opt).value);
    sym = std::max(sym, symmetry_defect(f, c, t, 256, opt));
  }
  const double height = family_height(f, c, {-2.0, 2.0, -2.0, 2.0}, 16, 256, opt);
  return {energy <= kFiberEnergy && sym <= kSymmetry && height <= kWindowHeight,
          "max fiber energy " + fmt(energy) + " (tol " + fmt(kFiberEnergy) + "), symmetry " + fmt(sym) +
              ", window height " + fmt(height) + " (tol " + fmt(kWindowHeight) + ")"};
}

Outcome julia_certificate() {
  const cplx delta = 0.3, t = 200.0;
  const auto a = julia_bidisk_centers(delta, t);
  const auto cert = certify_containment(delta, t, {a.begin(), a.end()}, 2.0, 0.05, 30);
  const auto rep = replay_certificate(cert, 0.01, 1);
  std::ofstream(g_out / "certificate_t200.json") << to_json(cert).dump(1) << "\n";
  return {cert.certified && rep.ok,
          std::string(cert.certified ? "Certified" : "Inconclusive") + ", " + std::to_string(cert.leaves.size()) +
              " leaves, replay " + (rep.ok ? "ok" : "failed") + " on " + std::to_string(rep.sampled) + " cells"};
}

Outcome rt_decay() {
  std::vector<double> rs;
  std::string detail;
  for (double t : {1e2, 1e3, 1e4}) {
    try {
      const auto e = estimate_rt(0.3, t, 0.05);
      rs.push_back(e.r);
      detail += "r(" + fmt(t) + ") = " + fmt(e.r) + "; ";
    } catch (const SweepExhausted&) {
      rs.push_back(INFINITY);
      detail += "r(" + fmt(t) + ") sweep exhausted at r_max 2; ";
    }
  }
  const bool pass = rs[0] > rs[1] && rs[1] > rs[2] && rs[2] <= kRtFinal;
  return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome height_cauchy() {
  const auto f = HenonFamily::quadratic_t(mpq_class(-1));
  std::mt19937_64 rng(2024);
  int bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const mpq_class x = random_rational(rng, 9, 9);
    const mpq_class y = random_rational(rng, 9, 9);
    const auto e = canonical_height(f, 0, {x, y}, HeightSign::Plus);
    const auto r = difference_ratios(e, 2);
    bool ok = true;
    for (std::size_t n = 3; n < r.size(); ++n) {
      if (std::isnan(r[n])) continue;
      worst = std::max(worst, r[n]);
      if (r[n] > kCauchyRatio) ok = false;
    }
    bad += ok ? 0 : 1;
  }
  return {bad == 0, std::to_string(bad) + " of 50 seeds exceed " + fmt(kCauchyRatio) + " for n >= 3 (worst " +
                        fmt(worst) + ")"};
}

Outcome height_harness() {
  const auto f = HenonFamily::quadratic_t(mpq_class(1, 2));
  const auto samples = random_height_samples(400, 5, 5, 11);
  const std::vector<HeightSample> first(samples.begin(), samples.begin() + 200);
  const std::vector<HeightSample> second(samples.begin() + 200, samples.end());
  const auto a = inequality_harness(f, first);
  const auto b = inequality_harness(f, second);
  const double c1 = std::max(a.c1, b.c1), c2 = std::max(a.c2, b.c2);
  auto drift = [](double small, double big) { return std::abs(big - small) / std::max(std::abs(small), 1e-300); };
  const double d1 = drift(a.c1, c1), d2 = drift(a.c2, c2);
  const bool finite = std::isfinite(a.c1) && std::isfinite(a.c2) && std::isfinite(c1) && std::isfinite(c2);
  return {finite && d1 < kConstantDrift && d2 < kConstantDrift,
          "C1 " + fmt(a.c1) + " -> " + fmt(c1) + " (" + fmt(100 * d1) + "%), C2 " + fmt(a.c2) + " -> " + fmt(c2) +
              " (" + fmt(100 * d2) + "%)"};
}

PeriodicClass brute_classify(cplx u, cplx s, double eps) {
  auto side = [eps](double m) { return std::abs(m - 1.0) <= eps ? 0 : (m > 1.0 ? 1 : -1); };
  const int cu = side(std::abs(u)), cs = side(std::abs(s));
  if (cu == 1 && cs == -1) return PeriodicClass::Saddle;
  if (cu == 1 && cs == 0) return PeriodicClass::SemiRepelling;
  if (cu == 0 && cs == -1) return PeriodicClass::SemiAttracting;
  if (cu == 1 && cs == 1) return PeriodicClass::Repelling;
  if (cu == -1 && cs == -1) return PeriodicClass::Attracting;
  return PeriodicClass::Neutral;
}

Outcome classifier_oracle() {
  const double eps = 1e-8;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> mod(0.0, 2.0), arg(-M_PI, M_PI);
  std::uniform_int_distribution<int> pick(0, 3);
  int mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    // A quarter of the moduli are drawn on or near the band edges.
    auto modulus = [&] {
      switch (pick(rng)) {
        case 0: return 1.0;
        case 1: return 1.0 + eps * (2.0 * mod(rng) - 2.0);
        default: return mod(rng);
      }
    };
    cplx a = std::polar(modulus(), arg(rng)), b = std::polar(modulus(), arg(rng));
    if (std::abs(a) < std::abs(b)) std::swap(a, b);
    if (classify({a, b}, eps) != brute_classify(a, b, eps)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000 pairs"};
}

Outcome renorm_saddle() {
  const auto r = saddle_experiment();
  const std::string now = to_json(r).dump(1) + "\n";
  std::ofstream(g_out / "renorm_saddle.json") << now;
  const bool same = now == slurp(fs::path(HENON_TEST_DATA) / "renorm_saddle.json");
  const double back = r.backward_sup.empty() ? INFINITY : r.backward_sup.back();
  return {r.fitted_ratio < kRenormRatio && back <= kBackwardSup && r.n_max == 20 && same,
          "ratio " + fmt(r.fitted_ratio) + ", backward_sup_20 " + fmt(back) + ", archive " +
              (same ? "identical" : "differs")};
}

Outcome reversible_proportionality() {
  const auto f = reversible();
  const MarkedPoint s{CPoly(), CPoly()};
  const Rect rect{-3.0, 3.0, -3.0, 3.0};
  MeasureOptions opt;
  const auto gp = marked_green_grid(f, MarkedFn(s), Sign::Plus, rect, 256, 256, opt);
  const auto gm = marked_green_grid(f, MarkedFn(s), Sign::Minus, rect, 256, 256, opt);
  const auto mp = laplacian_measure(gp), mm = laplacian_measure(gm);
  const auto rep = proportionality_test(mp, mm, gp, gm);

  ParamSearch ps;
  ps.seeds_per_axis = 256;
  std::map<int, std::vector<cplx>> groups;
  for (int n = 2; n <= 8; ++n) groups[n] = symmetric_periodic_params(f, s, n, rect, ps);
  const auto rows = equidistribution_report(groups, mp, 8);
  std::ofstream csv(g_out / "equidistribution.csv");
  write_equi_csv(csv, rows);
  std::string counts;
  for (const auto& r : rows) counts += (counts.empty() ? "" : " ") + std::to_string(r.count);
  return {rep.gamma >= kGammaLow && rep.gamma <= kGammaHigh && rep.residual <= kPropResidual && rows.size() == 7,
          "gamma " + fmt(rep.gamma) + ", residual " + fmt(rep.residual) + ", TV table archived (counts " + counts +
              ", tv at n = 8: " + fmt(rows.back().tv) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--strict")) {
      strict = true;
    } else if (!std::strcmp(argv[i], "--out") && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  fs::create_directories(g_out);

  const std::vector<Criterion> all = {
      {1, "green functional equations", 5, green_functional},
      {2, "fixed-point vanishing", 1, fixed_point_vanishing},
      {3, "dd^c calibration", 5, calibration},
      {4, "degenerate curve", 120, degenerate_curve},
      {5, "Julia containment certificate", 600, julia_certificate},
      {6, "r_t decay", 1800, rt_decay},
      {7, "height Cauchy property", 120, height_cauchy},
      {8, "height inequality harness", 300, height_harness},
      {9, "multiplier classifier oracle", 1, classifier_oracle},
      {10, "renormalization saddle experiment", 600, renorm_saddle},
      {11, "reversible proportionality", 600, reversible_proportionality},
  };

  std::ofstream report(g_out / "report.txt");
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over budget " + fmt(c.budget_s) + " s";
    }
    failed += o.pass ? 0 : 1;
    char line[1024];
    std::snprintf(line, sizeof line, "%s %2d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                  o.detail.c_str());
    std::fputs(line, stdout);
    std::fflush(stdout);
    report << line << std::flush;
  }
  std::printf("%d failed\n", failed);
  report << failed << " failed\n";
  return strict && failed ? 1 : 0;
}
