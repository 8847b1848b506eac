#include "henon/periodic.hpp"

#include <algorithm>
#include <iomanip>
#include <optional>
#include <ostream>

#include "henon/green.hpp"
#include "henon/parallel.hpp"

namespace henon {

namespace {

bool lex_less(const Point& a, const Point& b) {
  if (a.x.real() != b.x.real()) return a.x.real() < b.x.real();
  if (a.x.imag() != b.x.imag()) return a.x.imag() < b.x.imag();
  if (a.y.real() != b.y.real()) return a.y.real() < b.y.real();
  return a.y.imag() < b.y.imag();
}

double residual(const HenonFamily& f, cplx t, Point z, int k) { return norm_max(f.iterate(t, z, k) - z); }

// Newton on f^k(z) - z with step halving; nullopt on failure.
std::optional<Point> newton(const HenonFamily& f, cplx t, Point z, int k, double bound, const PeriodicSearch& opt) {
  double r = residual(f, t, z, k);
  for (int it = 0; it < opt.max_newton; ++it) {
    if (r <= opt.tol * (1.0 + norm_max(z))) return z;
    CMat2 j = differential_iterate(f, t, z, k);
    j.a -= 1.0;
    j.d -= 1.0;
    Point step;
    try {
      step = solve(j, z - f.iterate(t, z, k));
    } catch (const IllConditioned&) {
      return std::nullopt;
    }
    double lambda = 1.0;
    Point next = z + Point{lambda * step.x, lambda * step.y};
    double rn = residual(f, t, next, k);
    for (int h = 0; h < 8 && !(rn < r) && std::isfinite(norm_max(next)); ++h) {
      lambda *= 0.5;
      next = z + Point{lambda * step.x, lambda * step.y};
      rn = residual(f, t, next, k);
    }
    if (!std::isfinite(rn) || norm_max(next) > bound) return std::nullopt;
    if (!(rn < r) && norm_max(z - next) <= 1e-15 * (1.0 + norm_max(z))) break;
    z = next;
    r = rn;
  }
  if (r <= 1e-10 * (1.0 + norm_max(z))) return z;
  return std::nullopt;
}

bool has_smaller_period(const HenonFamily& f, cplx t, Point z, int k) {
  for (int j = 1; j < k; ++j) {
    if (k % j == 0 && residual(f, t, z, j) <= 1e-8 * (1.0 + norm_max(z))) return true;
  }
  return false;
}

}  // namespace

std::string to_string(PeriodicClass c) {
  switch (c) {
    case PeriodicClass::Saddle: return "saddle";
    case PeriodicClass::SemiRepelling: return "semi-repelling";
    case PeriodicClass::SemiAttracting: return "semi-attracting";
    case PeriodicClass::Repelling: return "repelling";
    case PeriodicClass::Attracting: return "attracting";
    case PeriodicClass::Neutral: return "neutral";
  }
  return "neutral";
}

std::vector<Point> orbit_points(const HenonFamily& f, cplx t, Point z, int k) {
  std::vector<Point> orb{z};
  for (int i = 1; i < k; ++i) orb.push_back(f.apply(t, orb.back()));
  return orb;
}

CMat2 differential_iterate(const HenonFamily& f, cplx t, Point z, int k) {
  CMat2 acc = CMat2::identity();
  for (int i = 0; i < k; ++i) {
    acc = f.differential(t, z) * acc;
    z = f.apply(t, z);
  }
  return acc;
}

Pair<QComplex> refine_periodic_quad(const HenonFamily& f, cplx t, Point z0, int k, int steps) {
  const QComplex tq(t);
  Pair<QComplex> z{QComplex(z0.x), QComplex(z0.y)};
  for (int it = 0; it < steps; ++it) {
    Mat2<QComplex> j = Mat2<QComplex>::identity();
    Pair<QComplex> w = z;
    for (int i = 0; i < k; ++i) {
      j = f.differential(tq, w) * j;
      w = f.apply(tq, w);
    }
    j.a = j.a - QComplex(1.0);
    j.d = j.d - QComplex(1.0);
    const QComplex det = j.det();
    if (qabs(det) == 0) break;
    const Pair<QComplex> r = z - w;  // solve j * step = z - f^k(z)
    z = z + Pair<QComplex>{(j.d * r.x - j.b * r.y) / det, (j.a * r.y - j.c * r.x) / det};
  }
  return z;
}

MultiplierPair multipliers_of(const CMat2& m) {
  auto [u, s] = eigenvalues(m);
  return {u, s};
}

MultiplierPair multipliers(const HenonFamily& f, cplx t, Point z, int k, double residual_tol) {
  f.check_parameter(t);
  if (k < 1) throw PreconditionFailed("period must be positive");
  if (residual(f, t, z, k) > residual_tol * (1.0 + norm_max(z))) throw NotPeriodic("point is not k-periodic");
  return multipliers_of(differential_iterate(f, t, z, k));
}

PeriodicClass classify(const MultiplierPair& m, double eps) {
  const double au = std::abs(m.u), as = std::abs(m.s);
  auto one = [eps](double r) { return std::abs(r - 1.0) <= eps; };
  auto gt = [&](double r) { return r > 1.0 && !one(r); };
  auto lt = [&](double r) { return r < 1.0 && !one(r); };
  if (gt(au) && lt(as)) return PeriodicClass::Saddle;
  if (gt(au) && one(as)) return PeriodicClass::SemiRepelling;
  if (one(au) && lt(as)) return PeriodicClass::SemiAttracting;
  if (gt(au) && gt(as)) return PeriodicClass::Repelling;
  if (lt(au) && lt(as)) return PeriodicClass::Attracting;
  return PeriodicClass::Neutral;
}

std::vector<PeriodicRecord> find_periodic(const HenonFamily& f, cplx t, int k, const SearchBox& box,
                                          const PeriodicSearch& opt) {
  if (k < 1) throw PreconditionFailed("period must be positive");
  if (opt.seeds_per_axis < 1) throw PreconditionFailed("seeds_per_axis must be positive");
  f.check_parameter(t);
  const EscapeData esc = escape_data(f, t);
  const double bound = 4.0 * std::max(esc.radius, esc.radius_minus);

  std::vector<Point> seeds;
  const int n = opt.seeds_per_axis;
  auto axis = [n](double lo, double hi, int i) { return lo + (i + 0.5) * (hi - lo) / n; };
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          seeds.push_back({cplx(axis(box.x.re_min, box.x.re_max, a), axis(box.x.im_min, box.x.im_max, b)),
                           cplx(axis(box.y.re_min, box.y.re_max, c), axis(box.y.im_min, box.y.im_max, d))});
        }
  seeds.insert(seeds.end(), opt.extra_seeds.begin(), opt.extra_seeds.end());

  std::vector<std::optional<Point>> found(seeds.size());
  parallel_for(seeds.size(), opt.threads, [&](std::size_t i) {
    auto z = newton(f, t, seeds[i], k, bound, opt);
    if (z && box.x.contains(z->x) && box.y.contains(z->y) && !has_smaller_period(f, t, *z, k)) found[i] = z;
  });

  std::vector<Point> pts;
  for (const auto& z : found)
    if (z) pts.push_back(*z);
  std::sort(pts.begin(), pts.end(), lex_less);

  std::vector<PeriodicRecord> out;
  std::vector<Point> seen;
  for (const Point& z : pts) {
    const bool dup = std::any_of(seen.begin(), seen.end(),
                                 [&](const Point& w) { return norm_max(w - z) <= 1e-6 * (1.0 + norm_max(z)); });
    if (dup) continue;
    auto orb = orbit_points(f, t, z, k);
    seen.insert(seen.end(), orb.begin(), orb.end());
    Point rep = *std::min_element(orb.begin(), orb.end(), lex_less);
    rep = newton(f, t, rep, k, bound, opt).value_or(rep);
    PeriodicRecord rec;
    rec.t = t;
    rec.z = rep;
    rec.period = k;
    rec.residual = residual(f, t, rep, k);
    rec.multipliers = multipliers_of(differential_iterate(f, t, rep, k));
    rec.classify_eps = opt.classify_eps;
    rec.cls = classify(rec.multipliers, opt.classify_eps);
    out.push_back(rec);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return lex_less(a.z, b.z); });
  return out;
}

void write_periodic_csv(std::ostream& out, const std::vector<PeriodicRecord>& records) {
  out << "t_re,t_im,x_re,y_re,x_im,y_im,period,u_re,u_im,s_re,s_im,class,residual,classify_eps\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.t.real() << ',' << r.t.imag() << ',' << r.z.x.real() << ',' << r.z.y.real() << ',' << r.z.x.imag() << ','
        << r.z.y.imag() << ',' << r.period << ',' << r.multipliers.u.real() << ',' << r.multipliers.u.imag() << ','
        << r.multipliers.s.real() << ',' << r.multipliers.s.imag() << ',' << to_string(r.cls) << ',' << r.residual
        << ',' << r.classify_eps << '\n';
  }
}

}  // namespace henon
