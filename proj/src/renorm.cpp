#include "henon/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>

#include "henon/parallel.hpp"
#include "henon/periodic.hpp"

namespace henon {
namespace {

// Truncated power series in one variable. Operands of different length are
// combined at the longer length; constants are length one.
template <class C>
struct Trunc {
  std::vector<C> c;

  Trunc() : c(1) {}
  Trunc(C v) : c{v} {}
  Trunc(double v) : c{C(v)} {}
  explicit Trunc(std::vector<C> v) : c(std::move(v)) {}

  C get(std::size_t k) const { return k < c.size() ? c[k] : C{}; }
};

template <class C>
Trunc<C> operator+(const Trunc<C>& a, const Trunc<C>& b) {
  std::vector<C> r(std::max(a.c.size(), b.c.size()));
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = a.get(k) + b.get(k);
  return Trunc<C>(std::move(r));
}
template <class C>
Trunc<C> operator-(const Trunc<C>& a, const Trunc<C>& b) {
  std::vector<C> r(std::max(a.c.size(), b.c.size()));
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = a.get(k) - b.get(k);
  return Trunc<C>(std::move(r));
}
template <class C>
Trunc<C> operator*(const Trunc<C>& a, const Trunc<C>& b) {
  const std::size_t n = std::max(a.c.size(), b.c.size());
  std::vector<C> r(n);
  for (std::size_t i = 0; i < a.c.size(); ++i) {
    for (std::size_t j = 0; j < b.c.size() && i + j < n; ++j) r[i + j] += a.c[i] * b.c[j];
  }
  return Trunc<C>(std::move(r));
}

using Series = Trunc<cplx>;

// Bivariate jet in (tau, w) truncated at total degree D, quad coefficients.
struct BiJet {
  int D = 0;
  std::vector<QComplex> c;  // (D + 1)^2 slots, tau^i w^j at i (D + 1) + j

  BiJet() : c(1) {}
  BiJet(QComplex v) : c{v} {}
  BiJet(double v) : c{QComplex(v)} {}

  static BiJet zero(int d) {
    BiJet r;
    r.D = d;
    r.c.assign(static_cast<std::size_t>((d + 1) * (d + 1)), QComplex());
    return r;
  }
  QComplex get(int i, int j) const { return i + j <= D ? c[static_cast<std::size_t>(i * (D + 1) + j)] : QComplex(); }
  QComplex& at(int i, int j) { return c[static_cast<std::size_t>(i * (D + 1) + j)]; }
};

BiJet combine(const BiJet& a, const BiJet& b, bool minus) {
  BiJet r = BiJet::zero(std::max(a.D, b.D));
  for (int i = 0; i <= r.D; ++i) {
    for (int j = 0; i + j <= r.D; ++j) r.at(i, j) = minus ? a.get(i, j) - b.get(i, j) : a.get(i, j) + b.get(i, j);
  }
  return r;
}
BiJet operator+(const BiJet& a, const BiJet& b) { return combine(a, b, false); }
BiJet operator-(const BiJet& a, const BiJet& b) { return combine(a, b, true); }
BiJet operator*(const BiJet& a, const BiJet& b) {
  BiJet r = BiJet::zero(std::max(a.D, b.D));
  const QComplex zero;
  for (int i = 0; i <= a.D; ++i) {
    for (int j = 0; i + j <= a.D; ++j) {
      const QComplex x = a.get(i, j);
      if (x == zero) continue;
      for (int k = 0; i + j + k <= r.D && k <= b.D; ++k) {
        for (int l = 0; i + j + k + l <= r.D && k + l <= b.D; ++l) r.at(i + k, j + l) += x * b.get(k, l);
      }
    }
  }
  return r;
}

}  // namespace

template <>
struct Lift<Series> {
  static Series from(cplx c) { return Series(c); }
};
template <>
struct Lift<BiJet> {
  static BiJet from(cplx c) { return BiJet(QComplex(c)); }
};

namespace {

double pair_norm(const Point& p) { return std::sqrt(std::norm(p.x) + std::norm(p.y)); }

Point fixed_residual(const HenonFamily& f, cplx t, Point z) { return f.apply(t, z) - z; }

// Newton on f_t(z) = z; returns false when it fails to settle.
bool newton_fixed(const HenonFamily& f, cplx t, Point& z) {
  for (int it = 0; it < 16; ++it) {
    CMat2 j = f.differential(t, z);
    j.a -= 1.0;
    j.d -= 1.0;
    Point step;
    try {
      step = solve(j, {-fixed_residual(f, t, z).x, -fixed_residual(f, t, z).y});
    } catch (const IllConditioned&) {
      return false;
    }
    z = z + step;
    if (!std::isfinite(norm_max(z))) return false;
    if (norm_max(step) <= 1e-15 * (1.0 + norm_max(z))) break;
  }
  return norm_max(fixed_residual(f, t, z)) <= 1e-13 * (1.0 + norm_max(z));
}

double eigen_gap(const HenonFamily& f, cplx t, Point z) {
  auto [a, b] = eigenvalues(f.differential(t, z));
  return std::min(std::abs(a - 1.0), std::abs(b - 1.0));
}

// dz/dt along the continuation: (I - Df) z' = df/dt.
Point tangent(const HenonFamily& f, cplx t, Point z) {
  const Pair<Dual> img = f.apply(Dual::variable(t), Pair<Dual>{Dual(z.x), Dual(z.y)});
  CMat2 m = f.differential(t, z);
  m = CMat2{1.0 - m.a, -m.b, -m.c, 1.0 - m.d};
  return solve(m, {img.x.d, img.y.d});
}

}  // namespace

std::vector<FixedPointSample> continue_fixed_point(const HenonFamily& f, cplx t0, Point z0, double disk_radius,
                                                   const ContinuationOptions& opt) {
  f.check_parameter(t0);
  if (norm_max(fixed_residual(f, t0, z0)) > 1e-10 * (1.0 + norm_max(z0))) throw NotPeriodic("z0 is not fixed at t0");
  if (eigen_gap(f, t0, z0) < opt.eigen_tol) throw EigenvalueOne("1 is an eigenvalue at the base point");
  if (!(disk_radius >= 0.0) || opt.rays < 1 || opt.rings < 1) throw PreconditionFailed("bad continuation disk");

  Point base = z0;
  newton_fixed(f, t0, base);
  std::vector<FixedPointSample> out{{t0, base, norm_max(fixed_residual(f, t0, base))}};
  const double h_max = disk_radius / (4.0 * opt.rings);
  for (int k = 0; k < opt.rays; ++k) {
    const cplx dir = std::polar(1.0, 2.0 * std::numbers::pi * k / opt.rays);
    double s = 0.0, h = h_max;
    Point z = base;
    double gap = eigen_gap(f, t0, z);
    for (int ring = 1; ring <= opt.rings; ++ring) {
      const double target = disk_radius * ring / opt.rings;
      while (s < target) {
        const double step = std::min(h, target - s);
        const cplx t = t0 + (s + step) * dir;
        Point trial = z;
        bool ok = true;
        try {
          const Point v = tangent(f, t0 + s * dir, z);
          trial = {z.x + v.x * step * dir, z.y + v.y * step * dir};
          f.check_parameter(t);
        } catch (const HenonError&) {
          ok = false;
        }
        ok = ok && newton_fixed(f, t, trial);
        const double g = ok ? eigen_gap(f, t, trial) : 0.0;
        if (ok && g >= 0.5 * gap && g >= opt.eigen_tol) {
          s += step;
          z = trial;
          gap = g;
          h = std::min(h_max, 2.0 * h);
          continue;
        }
        if (gap < opt.eigen_tol || (ok && g < opt.eigen_tol) || step < 1e-12 * std::max(disk_radius, 1.0)) {
          throw EigenvalueOne("continuation obstructed: multiplier approaches 1");
        }
        h = 0.5 * step;
      }
      const cplx t = t0 + target * dir;
      const double res = norm_max(fixed_residual(f, t, z));
      if (res > 1e-12 * (1.0 + norm_max(z))) throw NoConvergence("continued fixed point not refined");
      out.push_back({t, z, res});
    }
  }
  return out;
}

namespace {

using SeriesMap = std::function<Pair<Series>(const Pair<Series>&)>;
using PointMap = std::function<Point(const Point&)>;

Point series_eval(const std::vector<Point>& c, cplx w) {
  Point acc{0.0, 0.0};
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = {acc.x * w + it->x, acc.y * w + it->y};
  return acc;
}

double defect_on_circle(const PointMap& map, const std::vector<Point>& c, cplx u, double w_test, int samples) {
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const cplx w = std::polar(w_test, 2.0 * std::numbers::pi * k / samples);
    worst = std::max(worst, pair_norm(map(series_eval(c, w)) - series_eval(c, u * w)));
  }
  return worst;
}

UnstableSeries solve_series(const SeriesMap& smap, const PointMap& pmap, const CMat2& a, Point z, cplx t, int order,
                            double w_test, double eps) {
  if (order < 1) throw PreconditionFailed("series order must be positive");
  auto [u, s] = eigenvalues(a);
  if (!(std::abs(u) > 1.0 + eps)) throw PreconditionFailed("no expanding multiplier");
  for (int k = 2; k <= order; ++k) {
    const cplx uk = std::pow(u, k);
    if (std::abs(uk - u) < 1e-8 || std::abs(uk - s) < 1e-8) throw Resonance("u^k meets a multiplier");
  }
  UnstableSeries r{t, u, s, {z, eigenvector(a, u)}, 0.0, 0.0};
  for (int k = 2; k <= order; ++k) {
    std::vector<cplx> xs(static_cast<std::size_t>(k) + 1), ys(xs.size());
    for (int i = 0; i < k; ++i) {
      xs[static_cast<std::size_t>(i)] = r.coeffs[static_cast<std::size_t>(i)].x;
      ys[static_cast<std::size_t>(i)] = r.coeffs[static_cast<std::size_t>(i)].y;
    }
    const Pair<Series> img = smap({Series(xs), Series(ys)});
    const cplx uk = std::pow(u, k);
    const CMat2 m{uk - a.a, -a.b, -a.c, uk - a.d};
    r.coeffs.push_back(solve(m, {img.x.get(static_cast<std::size_t>(k)), img.y.get(static_cast<std::size_t>(k))}));
  }
  if (w_test <= 0.0) {
    const double last = std::max(pair_norm(r.coeffs.back()), 1e-300);
    w_test = std::pow(1e-12 / last, 1.0 / order) / std::abs(u);
  }
  r.w_test = w_test;
  r.defect = defect_on_circle(pmap, r.coeffs, u, w_test, 64);
  return r;
}

}  // namespace

Point UnstableSeries::operator()(cplx w) const { return series_eval(coeffs, w); }

Point UnstableSeries::extended(const HenonFamily& f, cplx w) const {
  int k = 0;
  while (std::abs(w) > w_test && k < 200) {
    w /= u;
    ++k;
  }
  Point z = (*this)(w);
  for (int i = 0; i < k; ++i) z = f.apply(t, z);
  return z;
}

UnstableSeries unstable_parametrization(const HenonFamily& f, cplx t, Point z, int order, double w_test,
                                        double classify_eps) {
  f.check_parameter(t);
  if (norm_max(fixed_residual(f, t, z)) > 1e-10 * (1.0 + norm_max(z))) throw NotPeriodic("z is not fixed at t");
  newton_fixed(f, t, z);
  const Series ts(t);
  SeriesMap smap = [&](const Pair<Series>& p) { return f.apply(ts, p); };
  PointMap pmap = [&](const Point& p) { return f.apply(t, p); };
  return solve_series(smap, pmap, f.differential(t, z), z, t, order, w_test, classify_eps);
}

UnstableSeries unstable_parametrization(const CMat2& m, int order, double w_test, double classify_eps) {
  SeriesMap smap = [&](const Pair<Series>& p) {
    return Pair<Series>{Series(m.a) * p.x + Series(m.b) * p.y, Series(m.c) * p.x + Series(m.d) * p.y};
  };
  PointMap pmap = [&](const Point& p) { return m * p; };
  return solve_series(smap, pmap, m, {0.0, 0.0}, 0.0, order, w_test, classify_eps);
}

double parametrization_defect(const HenonFamily& f, const UnstableSeries& rho, double w_test, int samples) {
  PointMap pmap = [&](const Point& p) { return f.apply(rho.t, p); };
  return defect_on_circle(pmap, rho.coeffs, rho.u, w_test, samples);
}

void write_series_csv(std::ostream& out, const UnstableSeries& rho) {
  out << "k,x_re,x_im,y_re,y_im\n";
  out.precision(17);
  for (std::size_t k = 0; k < rho.coeffs.size(); ++k) {
    const Point& c = rho.coeffs[k];
    out << k << ',' << c.x.real() << ',' << c.x.imag() << ',' << c.y.real() << ',' << c.y.imag() << '\n';
  }
}

LocalSaddleData local_fixed_point_data(const HenonFamily& f, cplx t0, Point z0, int q, int p) {
  f.check_parameter(t0);
  if (q < 1 || p < 1) throw PreconditionFailed("vanishing orders must be positive");
  if (norm_max(fixed_residual(f, t0, z0)) > 1e-10 * (1.0 + norm_max(z0))) throw NotPeriodic("z0 is not fixed at t0");
  newton_fixed(f, t0, z0);
  auto [u, s] = eigenvalues(f.differential(t0, z0));
  return {t0, z0, u, s, std::pow(u, 1.0 / q), std::pow(s, 1.0 / p), q, p};
}

namespace {

using QPair = Pair<QComplex>;

QPair horner(const std::vector<QPair>& c, const QComplex& tau) {
  QPair acc{};
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = {acc.x * tau + it->x, acc.y * tau + it->y};
  return acc;
}

// Coefficients in powers of (t - c) become coefficients in powers of (t - c - h).
std::vector<QPair> taylor_shift(std::vector<QPair> c, const QComplex& h) {
  const std::size_t n = c.size();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    for (std::size_t j = n - 1; j > k; --j) c[j - 1] = {c[j - 1].x + c[j].x * h, c[j - 1].y + c[j].y * h};
  }
  return c;
}

QPair qsolve(const Mat2<QComplex>& m, const QPair& rhs) {
  const QComplex det = m.det();
  const __float128 scale = fmaxq(fmaxq(qabs(m.a), qabs(m.b)), fmaxq(qabs(m.c), qabs(m.d)));
  if (qabs(det) <= 1e-30Q * scale * scale) throw IllConditioned("singular 2x2 system");
  return {(m.d * rhs.x - m.b * rhs.y) / det, (m.a * rhs.y - m.c * rhs.x) / det};
}

Mat2<QComplex> shifted_matrix(const Mat2<QComplex>& a, const QComplex& lambda) {
  return {a.a - lambda, a.b, a.c, a.d - lambda};
}

struct QuadSaddle {
  QPair p0;
  Mat2<QComplex> a;
  QComplex u;
  QComplex s;
};

QuadSaddle quad_saddle(const HenonFamily& f, cplx t0, Point z0) {
  QuadSaddle q;
  q.p0 = refine_periodic_quad(f, t0, z0, 1, 6);
  q.a = f.differential(QComplex(t0), q.p0);
  const QComplex tr = q.a.trace(), det = q.a.det();
  const QComplex disc = qsqrt(tr * tr - QComplex(4.0) * det);
  const QComplex l1 = (tr + disc) / QComplex(2.0), l2 = (tr - disc) / QComplex(2.0);
  const bool first = qabs(l1) >= qabs(l2);
  q.u = first ? l1 : l2;
  q.s = first ? l2 : l1;
  return q;
}

// Unit eigenvector, first nonzero coordinate real positive.
QPair quad_eigenvector(const Mat2<QComplex>& a, const QComplex& lambda) {
  QPair v1{a.b, lambda - a.a}, v2{lambda - a.d, a.c};
  auto nrm = [](const QPair& v) { return sqrtq(qabs(v.x) * qabs(v.x) + qabs(v.y) * qabs(v.y)); };
  QPair v = nrm(v1) >= nrm(v2) ? v1 : v2;
  const QComplex lead = qabs(v.x) > 0 ? v.x : v.y;
  const QComplex phase = lead / QComplex(qabs(lead));
  const QComplex scale = phase * QComplex(nrm(v));
  return {v.x / scale, v.y / scale};
}

BiJet param_jet(cplx t0, int d) {
  BiJet t = BiJet::zero(d);
  t.at(0, 0) = QComplex(t0);
  if (d >= 1) t.at(1, 0) = QComplex(1.0);
  return t;
}

}  // namespace

QMarkedPoint QMarkedPoint::from(const MarkedPoint& m, cplx center) {
  const std::size_t n = std::max<std::size_t>({m.a.coeffs().size(), m.b.coeffs().size(), 1});
  std::vector<QPair> c(n);
  for (std::size_t k = 0; k < m.a.coeffs().size(); ++k) c[k].x = QComplex(m.a.coeffs()[k]);
  for (std::size_t k = 0; k < m.b.coeffs().size(); ++k) c[k].y = QComplex(m.b.coeffs()[k]);
  return {center, taylor_shift(std::move(c), QComplex(center))};
}

QMarkedPoint QMarkedPoint::shifted(cplx new_center) const {
  return {new_center, taylor_shift(coeffs, QComplex(new_center) - QComplex(center))};
}

MarkedPoint QMarkedPoint::to_double() const {
  const auto c = taylor_shift(coeffs, -QComplex(center));
  std::vector<cplx> a, b;
  for (const auto& p : c) {
    a.push_back(static_cast<cplx>(p.x));
    b.push_back(static_cast<cplx>(p.y));
  }
  return {CPoly(a), CPoly(b)};
}

std::vector<QPair> fixed_point_jet(const HenonFamily& f, cplx t0, Point z0, int order) {
  f.check_parameter(t0);
  if (order < 0) throw PreconditionFailed("jet order must be nonnegative");
  const QuadSaddle q = quad_saddle(f, t0, z0);
  const BiJet t = param_jet(t0, order);
  Pair<BiJet> z{BiJet::zero(order), BiJet::zero(order)};
  z.x.at(0, 0) = q.p0.x;
  z.y.at(0, 0) = q.p0.y;
  const Mat2<QComplex> m = shifted_matrix(q.a, QComplex(1.0));
  for (int i = 1; i <= order; ++i) {
    const Pair<BiJet> img = f.apply(t, z);
    QPair phi;
    try {
      phi = qsolve(m, {-img.x.get(i, 0), -img.y.get(i, 0)});
    } catch (const IllConditioned&) {
      throw EigenvalueOne("1 is an eigenvalue at the fixed point");
    }
    z.x.at(i, 0) = phi.x;
    z.y.at(i, 0) = phi.y;
  }
  std::vector<QPair> out;
  for (int i = 0; i <= order; ++i) out.push_back({z.x.get(i, 0), z.y.get(i, 0)});
  return out;
}

QMarkedPoint adapted_marked_point(const HenonFamily& f, const LocalSaddleData& local, int p) {
  f.check_parameter(local.t0);
  if (p < 1) throw PreconditionFailed("vanishing order must be positive");
  if (local.q != 1) throw PreconditionFailed("the adapted marked point has unstable order 1");
  const int D = p - 1;
  const QuadSaddle q = quad_saddle(f, local.t0, local.sigma0);
  if (qabs(q.u) <= 1) throw PreconditionFailed("no expanding multiplier");
  const QPair e = quad_eigenvector(q.a, q.u);
  const BiJet t = param_jet(local.t0, D);
  Pair<BiJet> phi{BiJet::zero(D), BiJet::zero(D)};
  phi.x.at(0, 0) = q.p0.x;
  phi.y.at(0, 0) = q.p0.y;
  if (D >= 1) {
    phi.x.at(0, 1) = e.x;
    phi.y.at(0, 1) = e.y;
  }
  std::vector<QComplex> u(static_cast<std::size_t>(D) + 1);
  u[0] = q.u;

  // f_{t0+tau}(Phi(tau, w)) - Phi(tau, u(tau) w)
  auto residual = [&] {
    BiJet w = BiJet::zero(D);
    for (int i = 0; i + 1 <= D; ++i) w.at(i, 1) = u[static_cast<std::size_t>(i)];
    Pair<BiJet> comp{BiJet::zero(D), BiJet::zero(D)};
    BiJet wp(1.0);
    for (int j = 0; j <= D; ++j) {
      BiJet cx = BiJet::zero(D), cy = BiJet::zero(D);
      for (int i = 0; i + j <= D; ++i) {
        cx.at(i, 0) = phi.x.get(i, j);
        cy.at(i, 0) = phi.y.get(i, j);
      }
      comp.x = comp.x + cx * wp;
      comp.y = comp.y + cy * wp;
      wp = wp * w;
    }
    const Pair<BiJet> img = f.apply(t, phi);
    return Pair<BiJet>{img.x - comp.x, img.y - comp.y};
  };

  for (int k = 1; k <= D; ++k) {
    for (int j = 0; j <= k; ++j) {
      const int i = k - j;
      if (i == 0 && j == 1) continue;
      phi.x.at(i, j) = QComplex();
      phi.y.at(i, j) = QComplex();
      if (j == 1) u[static_cast<std::size_t>(i)] = QComplex();
      const Pair<BiJet> r = residual();
      const QPair rhs{-r.x.get(i, j), -r.y.get(i, j)};
      QPair sol;
      if (j == 1) {
        // Phi_i1 = (0, phi); unknowns (phi, u_i).
        const Mat2<QComplex> m{q.a.b, -e.x, q.a.d - q.u, -e.y};
        const QPair v = qsolve(m, rhs);
        sol = {QComplex(), v.x};
        u[static_cast<std::size_t>(i)] = v.y;
      } else {
        const QComplex uj = qpow(q.u, j);
        if (qabs(uj - q.s) < 1e-8 || (j >= 2 && qabs(uj - q.u) < 1e-8)) throw Resonance("u^j meets a multiplier");
        if (j == 0 && qabs(q.s - QComplex(1.0)) < 1e-8) throw EigenvalueOne("1 is an eigenvalue at the fixed point");
        sol = qsolve(shifted_matrix(q.a, uj), rhs);
      }
      phi.x.at(i, j) = sol.x;
      phi.y.at(i, j) = sol.y;
    }
  }
  std::vector<QPair> sigma(static_cast<std::size_t>(D) + 1);
  for (int i = 0; i <= D; ++i) {
    for (int j = 0; i + j <= D; ++j) {
      sigma[static_cast<std::size_t>(i + j)].x += phi.x.get(i, j);
      sigma[static_cast<std::size_t>(i + j)].y += phi.y.get(i, j);
    }
  }
  return {local.t0, std::move(sigma)};
}

std::vector<cplx> disk_samples(double radius, int rings, int per_ring) {
  std::vector<cplx> out{0.0};
  for (int k = 1; k <= rings; ++k) {
    for (int j = 0; j < per_ring; ++j) {
      out.push_back(std::polar(radius * k / rings, 2.0 * std::numbers::pi * j / per_ring));
    }
  }
  return out;
}

double geometric_ratio(const std::vector<double>& diffs) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t n = 0; n < diffs.size(); ++n) {
    if (!(diffs[n] > 0.0)) continue;
    const double x = static_cast<double>(n), y = std::log(diffs[n]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return std::exp(slope);
}

namespace {

// G at base + w for a fixed base, quad parameter: the orbit is followed at the exact
// parameter until it reaches the filtration region, then handed to green().
GreenEnclosure green_at(const HenonFamily& f, const QComplex& tq, const QPair& base, QPair w, Sign sign, int budget,
                        double tol) {
  const cplx t = static_cast<cplx>(tq);
  const EscapeData esc = escape_data(f, t);
  const bool fwd = sign == Sign::Plus;
  auto inside = [&](const QPair& p) {
    const double ax = static_cast<double>(qabs(p.x)), ay = static_cast<double>(qabs(p.y));
    return fwd ? ay >= std::max(ax, esc.radius) : ax >= std::max(ay, esc.radius_minus);
  };
  // Deviation from the fixed base first, so an orbit on the fixed point stays there.
  int m = 0;
  while (m < budget && fmaxq(qabs(w.x), qabs(w.y)) < 1e-3) {
    w = fwd ? f.deviation(tq, base, w) : f.deviation_inverse(tq, base, w);
    ++m;
  }
  QPair z = base + w;
  while (m < budget && !inside(z)) {
    z = fwd ? f.apply(tq, z) : f.apply_inverse(tq, z);
    ++m;
  }
  GreenOptions g;
  g.max_iter = std::max(budget - m, 1);
  g.tol = tol;
  GreenEnclosure e = green(f, esc, t, z, sign, g);
  const double scale = std::pow(static_cast<double>(f.degree()), m);
  e.lower /= scale;
  e.upper /= scale;
  e.iterations_used += m;
  return e;
}

RenormReport run_sequence(const std::string& kind, const HenonFamily& f, const QMarkedPoint& sigma_in,
                          const LocalSaddleData& local, cplx lambda, double radius, int n_max,
                          const std::vector<cplx>& samples, const RenormOptions& opt) {
  if (opt.n_min < 0 || n_max <= opt.n_min) throw PreconditionFailed("need 0 <= n_min < n_max");
  if (samples.empty()) throw PreconditionFailed("no parameter samples");
  if (!(std::abs(lambda) > 1.0)) throw PreconditionFailed("|lambda| must exceed 1");
  const QMarkedPoint sigma = sigma_in.shifted(local.t0);
  if (opt.check_periodicity && detect_global_periodicity(f, sigma.to_double()).periodic) {
    throw PreconditionFailed("marked point is globally periodic");
  }
  const int order = std::max(opt.jet_order, static_cast<int>(sigma.coeffs.size()) - 1);
  const auto fp = fixed_point_jet(f, local.t0, local.sigma0, order);
  // sigma - p as a series in tau, so that the deviation keeps full relative precision.
  std::vector<QPair> dev(fp.size());
  for (std::size_t m = 0; m < fp.size(); ++m) dev[m] = (m < sigma.coeffs.size() ? sigma.coeffs[m] : QPair{}) - fp[m];

  RenormReport r;
  r.kind = kind;
  r.disk_radius = radius;
  r.t0 = local.t0;
  r.lambda = lambda;
  r.q = local.q;
  r.n_min = opt.n_min;
  r.samples = samples;
  const std::size_t ns = samples.size();
  for (int n = opt.n_min; n <= n_max; ++n) {
    const QComplex scale = qpow(QComplex(lambda), n);
    const int budget = opt.base_iter + 2 * n;
    std::vector<GreenEnclosure> fw(ns), bw(ns);
    parallel_for(ns, opt.threads, [&](std::size_t k) {
      const QComplex tau = QComplex(samples[k]) / scale;
      const QComplex tq = QComplex(local.t0) + tau;
      const QPair base = horner(fp, tau), w0 = horner(dev, tau);
      QPair w = w0;
      for (int i = 0; i < n; ++i) w = f.deviation(tq, base, w);
      fw[k] = green_at(f, tq, base, w, Sign::Plus, budget, opt.green_tol);
      w = w0;
      for (int i = 0; i < n; ++i) w = f.deviation_inverse(tq, base, w);
      bw[k] = green_at(f, tq, base, w, Sign::Minus, budget, opt.green_tol);
    });
    double width = 0.0, back = 0.0;
    std::vector<double> vals(ns);
    for (std::size_t k = 0; k < ns; ++k) {
      width = std::max(width, fw[k].width());
      back = std::max(back, bw[k].upper);
      vals[k] = fw[k].mid();
    }
    if (!(width <= opt.width_tol)) {
      if (n == opt.n_min) throw AmplifiedNoise("enclosure too wide at the first n");
      r.truncated_at = n;
      break;
    }
    r.values.push_back(std::move(vals));
    r.max_width.push_back(width);
    r.backward_sup.push_back(back);
    r.n_max = n;
  }
  for (std::size_t i = 0; i + 1 < r.values.size(); ++i) {
    double sup = 0.0;
    for (std::size_t k = 0; k < ns; ++k) sup = std::max(sup, std::abs(r.values[i + 1][k] - r.values[i][k]));
    r.sup_diffs.push_back(sup);
  }
  r.fitted_ratio = geometric_ratio(r.sup_diffs);

  const auto& last = r.values.back();
  double mean = 0.0;
  for (double v : last) mean += v;
  mean /= static_cast<double>(ns);
  for (double v : last) r.nonconstancy += (v - mean) * (v - mean);
  r.nonconstancy /= static_cast<double>(ns);

  // Least-squares matching constant for the limit G+_{t0}(rho(a t^q)).
  const UnstableSeries rho = unstable_parametrization(f, local.t0, local.sigma0, opt.series_order);
  const EscapeData esc0 = escape_data(f, local.t0);
  GreenOptions g;
  g.max_iter = 200;
  g.tol = opt.green_tol;
  auto model = [&](cplx a, std::size_t k) {
    return green(f, esc0, local.t0, rho.extended(f, a * std::pow(samples[k], local.q)), Sign::Plus, g).mid();
  };
  auto objective = [&](cplx a) {
    double acc = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
      const double d = last[k] - model(a, k);
      acc += d * d;
    }
    return std::isfinite(acc) ? acc : std::numeric_limits<double>::infinity();
  };
  cplx best = 1.0;
  double best_val = objective(best);
  for (double mag : {0.5, 1.0, 2.0}) {
    for (int j = 0; j < 8; ++j) {
      const cplx a = std::polar(mag, std::numbers::pi * j / 4.0);
      const double v = objective(a);
      if (v < best_val) {
        best_val = v;
        best = a;
      }
    }
  }
  double step = 0.25 * std::abs(best);
  for (int it = 0; it < 400 && step > 1e-9 * std::max(1.0, std::abs(best)); ++it) {
    bool moved = false;
    for (cplx dir : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) {
      const cplx a = best + step * dir;
      const double v = objective(a);
      if (v < best_val) {
        best_val = v;
        best = a;
        moved = true;
        break;
      }
    }
    if (!moved) step *= 0.5;
  }
  r.fit_constant_a = best;
  for (std::size_t k = 0; k < ns; ++k) r.fit_residual = std::max(r.fit_residual, std::abs(last[k] - model(best, k)));
  return r;
}

}  // namespace

RenormReport renorm_sequence(const HenonFamily& f, const QMarkedPoint& sigma, const LocalSaddleData& local,
                             double disk_radius, int n_max, const std::vector<cplx>& t_samples,
                             const RenormOptions& opt) {
  if (!(std::abs(local.u) > 1.0 && std::abs(local.s) < 1.0)) throw PreconditionFailed("base point is not a saddle");
  return run_sequence("saddle", f, sigma, local, local.lambda_u, disk_radius, n_max, t_samples, opt);
}

RenormReport semi_repelling_sequence(const HenonFamily& f, const QMarkedPoint& sigma, const LocalSaddleData& local,
                                     cplx lambda, double disk_radius, int n_max, const std::vector<cplx>& t_samples,
                                     const RenormOptions& opt, double classify_eps) {
  if (!(std::abs(local.u) > 1.0 + classify_eps) || std::abs(std::abs(local.s) - 1.0) > classify_eps) {
    throw PreconditionFailed("base point is not semi-repelling");
  }
  return run_sequence("semi", f, sigma, local, lambda, disk_radius, n_max, t_samples, opt);
}

nlohmann::json to_json(const RenormReport& r) {
  auto c = [](cplx z) { return nlohmann::json::array({z.real(), z.imag()}); };
  nlohmann::json samples = nlohmann::json::array();
  for (cplx t : r.samples) samples.push_back(c(t));
  nlohmann::json j{{"kind", r.kind},
                   {"disk_radius", r.disk_radius},
                   {"t0", c(r.t0)},
                   {"lambda", c(r.lambda)},
                   {"q", r.q},
                   {"n_range", {r.n_min, r.n_max}},
                   {"samples", samples},
                   {"values", r.values},
                   {"max_width", r.max_width},
                   {"sup_diffs", r.sup_diffs},
                   {"fitted_ratio", r.fitted_ratio},
                   {"backward_sup", r.backward_sup},
                   {"fit_constant_a", c(r.fit_constant_a)},
                   {"fit_residual", r.fit_residual},
                   {"nonconstancy", r.nonconstancy}};
  j["truncated_at"] = r.truncated_at ? nlohmann::json(*r.truncated_at) : nlohmann::json(nullptr);
  return j;
}

RenormReport saddle_experiment(int threads) {
  const HenonFamily f = HenonFamily::quadratic(CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(0.3));
  const cplx t0 = -2.0;
  const cplx y = (1.3 + std::sqrt(1.3 * 1.3 - 4.0 * t0)) / 2.0;
  const LocalSaddleData local = local_fixed_point_data(f, t0, {y, y}, 1, 3);
  RenormOptions opt;
  opt.threads = threads;
  return renorm_sequence(f, adapted_marked_point(f, local, 3), local, 1e-2, 20, disk_samples(1e-2, 4, 16), opt);
}

RenormReport semi_experiment(int threads) {
  const HenonFamily f = HenonFamily::quadratic(CPoly(-0.75), CPoly(std::vector<cplx>{0.0, 1.0}));
  const LocalSaddleData local = local_fixed_point_data(f, -2.0, {0.5, 0.5}, 1, 3);
  RenormOptions opt;
  opt.threads = threads;
  return semi_repelling_sequence(f, adapted_marked_point(f, local, 3), local, 2.0, 1e-2, 16,
                                 disk_samples(1e-2, 4, 16), opt);
}

}  // namespace henon
