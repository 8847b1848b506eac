#include "henon/measures.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>

#include "henon/parallel.hpp"
#include "json.hpp"

namespace henon {

namespace {

void require_same_grid(const Rect& a, int anx, int any, const Rect& b, int bnx, int bny) {
  if (anx != bnx || any != bny || a.re_min != b.re_min || a.re_max != b.re_max || a.im_min != b.im_min ||
      a.im_max != b.im_max) {
    throw PreconditionFailed("grids must share rectangle and resolution");
  }
}

std::vector<cplx> seed_grid(const Rect& rect, int n) {
  std::vector<cplx> seeds;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      seeds.emplace_back(rect.re_min + (i + 0.5) * rect.width() / n, rect.im_min + (j + 0.5) * rect.height() / n);
  return seeds;
}

// Sorted, with roots closer than 1e-8 merged (first in sort order wins).
std::vector<cplx> dedupe(std::vector<std::optional<cplx>> found) {
  std::vector<cplx> pts;
  for (auto& t : found)
    if (t) pts.push_back(*t);
  std::sort(pts.begin(), pts.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  std::vector<cplx> out;
  for (cplx t : pts) {
    if (std::none_of(out.begin(), out.end(), [&](cplx s) { return std::abs(s - t) <= 1e-8; })) out.push_back(t);
  }
  return out;
}

Pair<Dual> orbit_residual(const HenonFamily& f, const MarkedPoint& sigma, int n, cplx t) {
  const Dual td = Dual::variable(t);
  const Pair<Dual> s0 = sigma.at(td);
  const Pair<Dual> sn = f.iterate(td, s0, n);
  return sn - s0;
}

double dual_norm(const Pair<Dual>& r) { return std::max(std::abs(r.x.v), std::abs(r.y.v)); }

std::optional<cplx> gauss_newton(const HenonFamily& f, const MarkedPoint& sigma, int n, cplx t, const Rect& rect,
                                 const ParamSearch& opt) {
  Pair<Dual> r = orbit_residual(f, sigma, n, t);
  double res = dual_norm(r);
  for (int it = 0; it < opt.max_iter && res > opt.tol; ++it) {
    const double jj = std::norm(r.x.d) + std::norm(r.y.d);
    if (!(jj > 0.0) || !std::isfinite(jj)) return std::nullopt;
    const cplx step = -(std::conj(r.x.d) * r.x.v + std::conj(r.y.d) * r.y.v) / jj;
    double lambda = 1.0;
    cplx next = t + step;
    Pair<Dual> rn = orbit_residual(f, sigma, n, next);
    for (int h = 0; h < 10 && !(dual_norm(rn) < res); ++h) {
      lambda *= 0.5;
      next = t + lambda * step;
      rn = orbit_residual(f, sigma, n, next);
    }
    if (!(dual_norm(rn) < res)) return std::nullopt;
    t = next;
    r = rn;
    res = dual_norm(r);
    if (std::abs(t) > 1e6) return std::nullopt;
  }
  if (!(res <= opt.tol)) return std::nullopt;
  // Polish: a few more undamped steps while the residual keeps shrinking.
  for (int it = 0; it < 4 && res > 0.0; ++it) {
    const double jj = std::norm(r.x.d) + std::norm(r.y.d);
    if (!(jj > 0.0)) break;
    const cplx next = t - (std::conj(r.x.d) * r.x.v + std::conj(r.y.d) * r.y.v) / jj;
    const Pair<Dual> rn = orbit_residual(f, sigma, n, next);
    if (!(dual_norm(rn) < res)) break;
    t = next;
    r = rn;
    res = dual_norm(r);
  }
  if (rect.contains(t)) return t;
  return std::nullopt;
}

Dual symmetric_residual(const HenonFamily& f, const MarkedPoint& sigma, int n, cplx t) {
  const Dual td = Dual::variable(t);
  const Pair<Dual> zn = f.iterate(td, sigma.at(td), n);
  return zn.x + zn.y;
}

std::optional<cplx> newton_symmetric(const HenonFamily& f, const MarkedPoint& sigma, int n, cplx t, const Rect& rect,
                                     const ParamSearch& opt) {
  for (int it = 0; it < opt.max_iter; ++it) {
    const Dual g = symmetric_residual(f, sigma, n, t);
    if (!std::isfinite(std::abs(g.v)) || std::abs(g.v) > 1e12) return std::nullopt;
    if (std::abs(g.v) <= opt.tol) {
      for (int k = 0; k < 3; ++k) {
        const Dual gk = symmetric_residual(f, sigma, n, t);
        if (gk.d == cplx{} || gk.v == cplx{}) break;
        const cplx next = t - gk.v / gk.d;
        if (!(std::abs(symmetric_residual(f, sigma, n, next).v) <= std::abs(gk.v))) break;
        t = next;
      }
      return rect.contains(t) ? std::optional<cplx>(t) : std::nullopt;
    }
    if (g.d == cplx{}) return std::nullopt;
    cplx step = -g.v / g.d;
    // Keep steps commensurate with the search window.
    const double cap = 0.5 * std::max(rect.width(), rect.height());
    if (std::abs(step) > cap) step *= cap / std::abs(step);
    t += step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(t))) {
      const Dual gn = symmetric_residual(f, sigma, n, t);
      const double scale = 1.0 + std::abs(gn.d) * 1e-15 * (1.0 + std::abs(t));
      return (std::abs(gn.v) <= opt.tol * scale && rect.contains(t)) ? std::optional<cplx>(t) : std::nullopt;
    }
  }
  return std::nullopt;
}

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  out.write(b, 8);
}

double get_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw HenonError("truncated .gmz payload");
  std::uint64_t bits = 0;
  for (int k = 7; k >= 0; --k) bits = (bits << 8) | b[k];
  return std::bit_cast<double>(bits);
}

}  // namespace

GreenEnclosure marked_green(const HenonFamily& f, const MarkedPoint& sigma, cplx t, Sign sign,
                            const GreenOptions& opt) {
  return green(f, t, sigma(t), sign, opt);
}

ValueGrid marked_green_grid(const HenonFamily& f, const MarkedFn& sigma, Sign sign, const Rect& rect, int nx, int ny,
                            const MeasureOptions& opt, double* max_width) {
  if (nx < 3 || ny < 3) throw PreconditionFailed("grid needs at least 3x3 nodes");
  for (cplx e : f.excluded_params()) {
    if (rect.contains(e)) throw DegenerateParameter("rectangle contains an excluded parameter");
  }
  ValueGrid g{rect, nx, ny, std::vector<double>(static_cast<std::size_t>(nx) * ny)};
  std::vector<double> widths(g.values.size());
  parallel_for(g.values.size(), opt.threads, [&](std::size_t idx) {
    const cplx t = g.node(static_cast<int>(idx % nx), static_cast<int>(idx / nx));
    const auto enc = green(f, escape_data(f, t), t, sigma(t), sign, opt.green);
    g.values[idx] = enc.mid();
    widths[idx] = enc.width();
  });
  if (max_width) *max_width = *std::max_element(widths.begin(), widths.end());
  return g;
}

GridMeasure laplacian_measure(const ValueGrid& g) {
  GridMeasure m;
  m.rect = g.rect;
  m.nx = g.nx;
  m.ny = g.ny;
  m.cell_mass.assign(g.values.size(), 0.0);
  const double hx = g.hx(), hy = g.hy();
  const double scale = 1.0 / (2.0 * M_PI);
  for (int j = 1; j + 1 < g.ny; ++j) {
    for (int i = 1; i + 1 < g.nx; ++i) {
      const double c = g.at(i, j);
      const double lap = (g.at(i + 1, j) + g.at(i - 1, j) - 2.0 * c) / (hx * hx) +
                         (g.at(i, j + 1) + g.at(i, j - 1) - 2.0 * c) / (hy * hy);
      m.cell_mass[static_cast<std::size_t>(j) * g.nx + i] = scale * lap * hx * hy;
    }
  }
  for (double v : m.cell_mass) {
    m.total += v;
    if (v < 0.0) m.negative_mass += v;
  }
  return m;
}

GridMeasure measure_grid(const HenonFamily& f, const MarkedFn& sigma, Sign sign, const Rect& rect, int nx, int ny,
                         const MeasureOptions& opt) {
  double width = 0.0;
  const ValueGrid g = marked_green_grid(f, sigma, sign, rect, nx, ny, opt, &width);
  const double h2 = g.hx() * g.hy();
  if (width > opt.width_factor * h2) {
    throw ResolutionTooCoarse("enclosure width " + std::to_string(width) + " exceeds the stencil scale " +
                              std::to_string(opt.width_factor * h2));
  }
  return laplacian_measure(g);
}

GridMeasure measure_grid(const HenonFamily& f, const MarkedPoint& sigma, Sign sign, const Rect& rect, int nx, int ny,
                         const MeasureOptions& opt) {
  return measure_grid(f, MarkedFn([&sigma](cplx t) { return sigma(t); }), sign, rect, nx, ny, opt);
}

ProportionalityReport proportionality_test(const GridMeasure& mu_plus, const GridMeasure& mu_minus,
                                           const ValueGrid& g_plus, const ValueGrid& g_minus, double mass_tol) {
  require_same_grid(mu_plus.rect, mu_plus.nx, mu_plus.ny, mu_minus.rect, mu_minus.nx, mu_minus.ny);
  require_same_grid(mu_plus.rect, mu_plus.nx, mu_plus.ny, g_plus.rect, g_plus.nx, g_plus.ny);
  require_same_grid(mu_plus.rect, mu_plus.nx, mu_plus.ny, g_minus.rect, g_minus.nx, g_minus.ny);
  if (mu_minus.total < mass_tol) throw DegenerateFit("mu_minus has no mass to fit against");
  double pm = 0.0, mm = 0.0;
  for (std::size_t k = 0; k < mu_plus.cell_mass.size(); ++k) {
    pm += mu_plus.cell_mass[k] * mu_minus.cell_mass[k];
    mm += mu_minus.cell_mass[k] * mu_minus.cell_mass[k];
  }
  ProportionalityReport r;
  r.gamma = pm / mm;
  if (!(r.gamma > 0.0)) throw DegenerateFit("fitted proportionality constant is not positive");
  double err = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < mu_plus.cell_mass.size(); ++k) {
    err += std::abs(mu_plus.cell_mass[k] - r.gamma * mu_minus.cell_mass[k]);
    norm += std::abs(mu_plus.cell_mass[k]);
  }
  r.residual = norm > 0.0 ? err / norm : 0.0;
  ValueGrid h = g_plus;
  for (std::size_t k = 0; k < h.values.size(); ++k) h.values[k] -= r.gamma * g_minus.values[k];
  for (double v : laplacian_measure(h).cell_mass) r.harmonic_defect += std::abs(v);
  return r;
}

std::vector<cplx> periodic_params(const HenonFamily& f, const MarkedPoint& sigma, int n, const Rect& rect,
                                  const ParamSearch& opt) {
  if (n < 1) throw PreconditionFailed("period must be positive");
  if (detect_global_periodicity(f, sigma).periodic) throw PreconditionFailed("marked point is globally periodic");
  const auto seeds = seed_grid(rect, opt.seeds_per_axis);
  std::vector<std::optional<cplx>> found(seeds.size());
  parallel_for(seeds.size(), opt.threads, [&](std::size_t i) {
    try {
      found[i] = gauss_newton(f, sigma, n, seeds[i], rect, opt);
    } catch (const DegenerateParameter&) {
    }
  });
  return dedupe(std::move(found));
}

void check_reversible(const HenonFamily& f, const Rect& rect) {
  std::mt19937_64 rng(0xfeed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto tau = [](Point z) { return Point{-z.y, -z.x}; };
  for (int k = 0; k < 24; ++k) {
    const cplx t(rect.re_min + u(rng) * rect.width(), rect.im_min + u(rng) * rect.height());
    const Point z{cplx(2 * u(rng) - 1, 2 * u(rng) - 1), cplx(2 * u(rng) - 1, 2 * u(rng) - 1)};
    const Point lhs = tau(f.apply(t, tau(z)));
    const Point rhs = f.apply_inverse(t, z);
    if (norm_max(lhs - rhs) > 1e-10 * (1.0 + norm_max(rhs))) {
      throw NotReversible("family is not reversible under (x, y) -> (-y, -x)");
    }
  }
}

std::vector<cplx> symmetric_periodic_params(const HenonFamily& f, const MarkedPoint& sigma, int n, const Rect& rect,
                                            const ParamSearch& opt) {
  if (n < 1) throw PreconditionFailed("half period must be positive");
  check_reversible(f, rect);
  if (!((sigma.a.coeffs().size() == sigma.b.coeffs().size()) && [&] {
        for (std::size_t k = 0; k < sigma.a.coeffs().size(); ++k)
          if (sigma.a.coeffs()[k] != -sigma.b.coeffs()[k]) return false;
        return true;
      }())) {
    throw PreconditionFailed("marked point must lie on the line y = -x");
  }
  const auto seeds = seed_grid(rect, opt.seeds_per_axis);
  std::vector<std::optional<cplx>> found(seeds.size());
  parallel_for(seeds.size(), opt.threads, [&](std::size_t i) {
    found[i] = newton_symmetric(f, sigma, n, seeds[i], rect, opt);
  });
  return dedupe(std::move(found));
}

std::vector<EquiRow> equidistribution_report(const std::map<int, std::vector<cplx>>& groups, const GridMeasure& mu,
                                             int boxes) {
  if (boxes < 1) throw PreconditionFailed("partition needs at least one box");
  std::vector<double> q(static_cast<std::size_t>(boxes) * boxes, 0.0);
  auto box_of = [&](cplx t) {
    const int bi = std::clamp(static_cast<int>((t.real() - mu.rect.re_min) / mu.rect.width() * boxes), 0, boxes - 1);
    const int bj = std::clamp(static_cast<int>((t.imag() - mu.rect.im_min) / mu.rect.height() * boxes), 0, boxes - 1);
    return static_cast<std::size_t>(bj) * boxes + bi;
  };
  double qtot = 0.0;
  for (int j = 0; j < mu.ny; ++j) {
    for (int i = 0; i < mu.nx; ++i) {
      const double m = std::max(0.0, mu.at(i, j));
      const cplx c(mu.rect.re_min + (i + 0.5) * mu.rect.width() / mu.nx,
                   mu.rect.im_min + (j + 0.5) * mu.rect.height() / mu.ny);
      q[box_of(c)] += m;
      qtot += m;
    }
  }
  if (!(qtot > 0.0)) throw PreconditionFailed("measure has no positive mass");
  for (double& v : q) v /= qtot;
  std::vector<EquiRow> rows;
  for (const auto& [key, pts] : groups) {
    std::vector<double> p(q.size(), 0.0);
    std::size_t inside = 0;
    for (cplx t : pts) {
      if (!mu.rect.contains(t)) continue;
      p[box_of(t)] += 1.0;
      ++inside;
    }
    EquiRow row{key, inside, 1.0};
    if (inside > 0) {
      double tv = 0.0;
      for (std::size_t b = 0; b < q.size(); ++b) tv += std::abs(p[b] / inside - q[b]);
      row.tv = 0.5 * tv;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_equi_csv(std::ostream& out, const std::vector<EquiRow>& rows) {
  out << "key,count,tv\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.key << ',' << r.count << ',' << r.tv << '\n';
}

void write_gmz(const std::filesystem::path& path, const GridMeasure& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HenonError("cannot write " + path.string());
  const nlohmann::json header{{"format", "gmz"},
                              {"version", 1},
                              {"rect", {m.rect.re_min, m.rect.re_max, m.rect.im_min, m.rect.im_max}},
                              {"nx", m.nx},
                              {"ny", m.ny},
                              {"total", m.total},
                              {"negative_mass", m.negative_mass},
                              {"dtype", "float64-le"},
                              {"order", "row-major, row j = imaginary index"}};
  out << header.dump() << '\n';
  for (double v : m.cell_mass) put_le(out, v);
}

GridMeasure read_gmz(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HenonError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const auto h = nlohmann::json::parse(line);
  GridMeasure m;
  const auto& r = h.at("rect");
  m.rect = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
  m.nx = h.at("nx").get<int>();
  m.ny = h.at("ny").get<int>();
  m.total = h.at("total").get<double>();
  m.negative_mass = h.at("negative_mass").get<double>();
  m.cell_mass.resize(static_cast<std::size_t>(m.nx) * m.ny);
  for (double& v : m.cell_mass) v = get_le(in);
  return m;
}

}  // namespace henon
