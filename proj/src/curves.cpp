#include "henon/curves.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "henon/family_io.hpp"
#include "henon/measures.hpp"
#include "henon/parallel.hpp"

namespace henon {

BiPoly::BiPoly(std::vector<std::vector<cplx>> c) : c_(std::move(c)) { trim(); }

BiPoly BiPoly::from_t(const CPoly& p) { return BiPoly({p.coeffs()}); }

BiPoly BiPoly::w() { return BiPoly({{}, {cplx(1.0)}}); }

void BiPoly::trim() {
  for (auto& row : c_) {
    while (!row.empty() && row.back() == cplx{}) row.pop_back();
  }
  while (!c_.empty() && c_.back().empty()) c_.pop_back();
}

cplx BiPoly::operator()(cplx t, cplx w) const {
  cplx acc{};
  for (auto k = c_.rbegin(); k != c_.rend(); ++k) acc = acc * w + CPoly(*k)(t);
  return acc;
}

cplx BiPoly::dw(cplx t, cplx w) const {
  cplx acc{};
  for (int k = w_degree(); k >= 1; --k) acc = acc * w + static_cast<double>(k) * CPoly(c_[k])(t);
  return acc;
}

BiPoly operator+(const BiPoly& a, const BiPoly& b) {
  auto c = a.c_;
  if (c.size() < b.c_.size()) c.resize(b.c_.size());
  for (std::size_t k = 0; k < b.c_.size(); ++k) {
    if (c[k].size() < b.c_[k].size()) c[k].resize(b.c_[k].size());
    for (std::size_t j = 0; j < b.c_[k].size(); ++j) c[k][j] += b.c_[k][j];
  }
  return BiPoly(std::move(c));
}

BiPoly operator-(const BiPoly& a, const BiPoly& b) { return a + BiPoly::from_t(CPoly(cplx(-1.0))) * b; }

BiPoly operator*(const BiPoly& a, const BiPoly& b) {
  if (a.c_.empty() || b.c_.empty()) return {};
  std::vector<std::vector<cplx>> c(a.c_.size() + b.c_.size() - 1);
  for (std::size_t k1 = 0; k1 < a.c_.size(); ++k1) {
    for (std::size_t k2 = 0; k2 < b.c_.size(); ++k2) {
      auto& row = c[k1 + k2];
      const auto& ra = a.c_[k1];
      const auto& rb = b.c_[k2];
      if (ra.empty() || rb.empty()) continue;
      if (row.size() < ra.size() + rb.size() - 1) row.resize(ra.size() + rb.size() - 1);
      for (std::size_t j1 = 0; j1 < ra.size(); ++j1) {
        for (std::size_t j2 = 0; j2 < rb.size(); ++j2) row[j1 + j2] += ra[j1] * rb[j2];
      }
    }
  }
  return BiPoly(std::move(c));
}

CurveFamily CurveFamily::line(cplx a, cplx b, cplx c, cplx d, Rect domain) {
  CurveFamily out;
  out.x = BiPoly({{b}, {a}});
  out.y = BiPoly({{d}, {c}});
  out.w_domain = domain;
  return out;
}

CurveFamily image(const HenonFamily& f, const CurveFamily& c) {
  BiPoly x = c.x;
  BiPoly y = c.y;
  for (const auto& fac : f.factors()) {
    BiPoly py;
    for (auto it = fac.p.rbegin(); it != fac.p.rend(); ++it) py = py * y + BiPoly::from_t(*it);
    BiPoly ny = py - BiPoly::from_t(fac.delta) * x;
    x = y;
    y = std::move(ny);
  }
  return {x, y, c.w_domain};
}

namespace {

cplx grid_node(const Rect& r, int res, int i, int j) {
  return {r.re_min + (i + 0.5) * r.width() / res, r.im_min + (j + 0.5) * r.height() / res};
}

double dist(const Point& a, const Point& b) { return std::sqrt(std::norm(a.x - b.x) + std::norm(a.y - b.y)); }

}  // namespace

void check_injective(const CurveFamily& c, const std::vector<cplx>& ts, int res) {
  for (cplx t : ts) {
    std::vector<Point> pts;
    double scale = 1.0;
    for (int j = 0; j < res; ++j) {
      for (int i = 0; i < res; ++i) {
        pts.push_back(c.at(t, grid_node(c.w_domain, res, i, j)));
        scale = std::max({scale, std::abs(pts.back().x), std::abs(pts.back().y)});
      }
    }
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x.real() < b.x.real(); });
    const double tol = 1e-9 * scale;
    for (std::size_t a = 0; a < pts.size(); ++a) {
      for (std::size_t b = a + 1; b < pts.size() && pts[b].x.real() - pts[a].x.real() <= tol; ++b) {
        if (dist(pts[a], pts[b]) <= tol) {
          throw InjectivityViolation("curve parameterization is not injective on its w-domain");
        }
      }
    }
  }
}

ValueGrid fiber_green(const HenonFamily& f, const CurveFamily& c, cplx t, int w_res, const CurveOptions& opt,
                      std::vector<double>* lower, double* max_width) {
  if (w_res < 3) throw PreconditionFailed("fiber grid needs at least 3x3 cells");
  f.check_parameter(t);
  const EscapeData esc = escape_data(f, t);
  ValueGrid g{c.w_domain, w_res, w_res, std::vector<double>(static_cast<std::size_t>(w_res) * w_res)};
  std::vector<double> lo(g.values.size());
  std::vector<double> widths(g.values.size());
  parallel_for(g.values.size(), opt.threads, [&](std::size_t k) {
    const int i = static_cast<int>(k % w_res);
    const int j = static_cast<int>(k / w_res);
    const GreenEnclosure e = green_max(f, esc, t, c.at(t, g.node(i, j)), opt.green);
    g.values[k] = e.mid();
    lo[k] = e.lower;
    widths[k] = e.width();
  });
  if (lower) *lower = std::move(lo);
  if (max_width) *max_width = *std::max_element(widths.begin(), widths.end());
  return g;
}

FiberEnergy fiber_energy(const HenonFamily& f, const CurveFamily& c, cplx t, int w_res, const CurveOptions& opt) {
  check_injective(c, {t}, std::min(w_res, 24));
  FiberEnergy out;
  std::vector<double> lower;
  const ValueGrid g = fiber_green(f, c, t, w_res, opt, &lower, &out.max_width);
  const GridMeasure mu = laplacian_measure(g);
  double sum = 0.0;
  for (std::size_t k = 0; k < g.values.size(); ++k) sum += g.values[k] * mu.cell_mass[k];
  out.value = sum;
  out.boundary_flag = true;
  for (int j = 0; j < w_res; ++j) {
    for (int i = 0; i < w_res; ++i) {
      if (i != 0 && j != 0 && i != w_res - 1 && j != w_res - 1) continue;
      if (!(lower[static_cast<std::size_t>(j) * w_res + i] > 0.0)) out.boundary_flag = false;
    }
  }
  return out;
}

double symmetry_defect(const HenonFamily& f, const CurveFamily& c, cplx t, int w_res, const CurveOptions& opt) {
  f.check_parameter(t);
  const EscapeData esc = escape_data(f, t);
  std::vector<double> d(static_cast<std::size_t>(w_res) * w_res);
  parallel_for(d.size(), opt.threads, [&](std::size_t k) {
    const Point z = c.at(t, grid_node(c.w_domain, w_res, static_cast<int>(k % w_res), static_cast<int>(k / w_res)));
    const Point tz{-z.y, -z.x};
    const GreenEnclosure gp = green(f, esc, t, z, Sign::Plus, opt.green);
    const GreenEnclosure gm = green(f, esc, t, tz, Sign::Minus, opt.green);
    d[k] = std::max(std::abs(gp.upper - gm.lower), std::abs(gm.upper - gp.lower));
  });
  return *std::max_element(d.begin(), d.end());
}

EnergyProfile energy_profile(const HenonFamily& f, const CurveFamily& c, const Rect& t_rect, int t_res, int w_res,
                             const CurveOptions& opt) {
  for (cplx e : f.excluded_params()) {
    if (t_rect.contains(e)) throw DegenerateParameter("rectangle contains an excluded parameter");
  }
  EnergyProfile p;
  p.values = ValueGrid{t_rect, t_res, t_res, std::vector<double>(static_cast<std::size_t>(t_res) * t_res)};
  std::vector<char> flags(p.values.values.size());
  CurveOptions inner = opt;
  inner.threads = 1;
  parallel_for(p.values.values.size(), opt.threads, [&](std::size_t k) {
    const cplx t = p.values.node(static_cast<int>(k % t_res), static_cast<int>(k / t_res));
    const FiberEnergy e = fiber_energy(f, c, t, w_res, inner);
    p.values.values[k] = e.value;
    flags[k] = e.boundary_flag;
  });
  p.boundary_flags.assign(flags.begin(), flags.end());
  return p;
}

double profile_mass(const ValueGrid& profile) {
  if (profile.nx < 3 || profile.ny < 3 || profile.rect.width() <= 0.0 || profile.rect.height() <= 0.0) return 0.0;
  return laplacian_measure(profile).total;
}

double family_height(const HenonFamily& f, const CurveFamily& c, const Rect& t_rect, int t_res, int w_res,
                     const CurveOptions& opt) {
  if (t_rect.width() <= 0.0 || t_rect.height() <= 0.0) return 0.0;
  return profile_mass(energy_profile(f, c, t_rect, t_res, w_res, opt).values);
}

NondegeneracyVerdict nondegeneracy_probe(const HenonFamily& f, const CurveFamily& c, const std::vector<Rect>& windows,
                                         int t_res, int w_res, double mass_tol, const CurveOptions& opt) {
  double best = 0.0;
  for (const Rect& w : windows) best = std::max(best, family_height(f, c, w, t_res, w_res, opt));
  if (best > 10.0 * mass_tol) return {true, best};
  return {false, 10.0 * mass_tol};
}

namespace {

cplx clamp_to(const Rect& r, cplx w) {
  return {std::clamp(w.real(), r.re_min, r.re_max), std::clamp(w.imag(), r.im_min, r.im_max)};
}

// Minimum distance from the fiber over w_domain to p: grid search, then
// Gauss-Newton on |c(w) - p|^2 kept inside the domain.
double fiber_distance(const CurveFamily& c, cplx t, const Point& p, int w_res) {
  cplx best_w{};
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < w_res; ++j) {
    for (int i = 0; i < w_res; ++i) {
      const cplx w = grid_node(c.w_domain, w_res, i, j);
      const double d = dist(c.at(t, w), p);
      if (d < best) {
        best = d;
        best_w = w;
      }
    }
  }
  cplx w = best_w;
  for (int it = 0; it < 30; ++it) {
    const Point z = c.at(t, w);
    const Point dz = c.dw(t, w);
    const double jj = std::norm(dz.x) + std::norm(dz.y);
    if (jj == 0.0) break;
    const cplx step = -(std::conj(dz.x) * (z.x - p.x) + std::conj(dz.y) * (z.y - p.y)) / jj;
    const cplx nw = clamp_to(c.w_domain, w + step);
    const double d = dist(c.at(t, nw), p);
    if (!(d < best)) break;
    best = d;
    w = nw;
  }
  return best;
}

}  // namespace

SigmaReport sigma_distance_check(const CurveFamily& c, cplx delta, const std::vector<cplx>& t_samples, double r,
                                 int w_res) {
  SigmaReport rep;
  rep.r = r;
  rep.vacuous = t_samples.empty();
  for (cplx t : t_samples) {
    double d = std::numeric_limits<double>::infinity();
    for (const Point& p : sigma_points(delta, t)) d = std::min(d, fiber_distance(c, t, p, w_res));
    rep.distances.push_back(d);
    if (d < r) rep.pass = false;
  }
  return rep;
}

namespace {

nlohmann::json bipoly_to_json(const BiPoly& b) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : b.coeffs()) j.push_back(cpoly_to_json(CPoly(row)));
  return j;
}

BiPoly bipoly_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw InvalidFamily(where + ": expected a list of t-polynomials");
  std::vector<std::vector<cplx>> c;
  for (std::size_t k = 0; k < j.size(); ++k) {
    c.push_back(cpoly_from_json(j[k], where + "[" + std::to_string(k) + "]").coeffs());
  }
  return BiPoly(std::move(c));
}

}  // namespace

CurveFamily curve_from_json(const nlohmann::json& j) {
  CurveFamily c;
  c.x = bipoly_from_json(j.at("x"), "x");
  c.y = bipoly_from_json(j.at("y"), "y");
  if (j.contains("w_domain")) {
    const auto& d = j.at("w_domain");
    c.w_domain = Rect{d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>(), d.at(3).get<double>()};
  }
  if (!(c.w_domain.width() > 0.0 && c.w_domain.height() > 0.0)) throw InvalidFamily("w_domain must have positive area");
  return c;
}

nlohmann::json curve_to_json(const CurveFamily& c) {
  return {{"x", bipoly_to_json(c.x)},
          {"y", bipoly_to_json(c.y)},
          {"w_domain", {c.w_domain.re_min, c.w_domain.re_max, c.w_domain.im_min, c.w_domain.im_max}}};
}

void write_profile_csv(std::ostream& out, const EnergyProfile& p) {
  out << "t_re,t_im,value,boundary_flag\n" << std::setprecision(17);
  for (int j = 0; j < p.values.ny; ++j) {
    for (int i = 0; i < p.values.nx; ++i) {
      const cplx t = p.values.node(i, j);
      const std::size_t k = static_cast<std::size_t>(j) * p.values.nx + i;
      out << t.real() << ',' << t.imag() << ',' << p.values.values[k] << ',' << (p.boundary_flags[k] ? 1 : 0) << '\n';
    }
  }
}

}  // namespace henon
