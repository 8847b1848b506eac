#include "henon/green.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "henon/parallel.hpp"
#include "json.hpp"

namespace henon {

namespace {

constexpr int kMaxLogSteps = 900;

double lower_coeff_sum(const HenonFactor& f, cplx t) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < f.p.size(); ++i) s += std::abs(f.p[i](t));
  return s;
}

bool in_plus(const EscapeData& e, Point z) {
  const double ay = std::abs(z.y);
  return ay >= std::abs(z.x) && ay >= e.radius;
}

bool in_minus(const EscapeData& e, Point z) {
  const double ax = std::abs(z.x);
  return ax >= std::abs(z.y) && ax >= e.radius_minus;
}

// Spot check: sampled points of each escape region map deeper into it.
void verify_invariance(const HenonFamily& f, cplx t, const EscapeData& e) {
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto polar = [&](double r) { return std::polar(r, 2.0 * M_PI * u(rng)); };
  for (int k = 0; k < 32; ++k) {
    const double r = e.radius * (1.0 + 3.0 * u(rng));
    Point z{polar(r * u(rng)), polar(r)};
    Point w = f.apply(t, z);
    if (!in_plus(e, w) || std::abs(w.y) < 2.0 * std::abs(z.y) * (1.0 - 1e-12)) {
      throw HenonError("forward escape region is not invariant at this parameter");
    }
    const double rm = e.radius_minus * (1.0 + 3.0 * u(rng));
    Point zm{polar(rm), polar(rm * u(rng))};
    Point wm = f.apply_inverse(t, zm);
    if (!in_minus(e, wm) || std::abs(wm.x) < 2.0 * std::abs(zm.x) * (1.0 - 1e-12)) {
      throw HenonError("backward escape region is not invariant at this parameter");
    }
  }
}

struct PreEscape {
  bool escaped = false;
  int escaped_at = 0;     // first step inside the escape region
  int steps = 0;          // steps followed exactly
  double log_norm = 0.0;  // log ||z_steps||
  double log_lead = 0.0;  // log of the dominant coordinate once escaped
};

double log_abs(const cplx& c) { return std::log(std::abs(c)); }
double log_abs(const QComplex& c) { return static_cast<double>(logq(qabs(c))); }

// Past this magnitude the interval recurrence's per-step slack is negligible.
constexpr double kLogHandoff = 150.0;

// Exact-orbit phase: iterate until the orbit enters the escape region, then keep
// following it exactly until it is large enough to hand off to log tracking.
template <class S>
PreEscape pre_escape(const HenonFamily& f, const EscapeData& e, cplx t, Pair<S> z, bool fwd, int max_iter) {
  const S ts = lift<S>(t);
  PreEscape r;
  for (;;) {
    const double lx = log_abs(z.x), ly = log_abs(z.y);
    r.log_norm = std::max(lx, ly);
    const double lead = fwd ? ly : lx;
    if (!r.escaped) {
      const bool inside = fwd ? (ly >= lx && ly >= std::log(e.radius)) : (lx >= ly && lx >= std::log(e.radius_minus));
      if (inside) {
        r.escaped = true;
        r.escaped_at = r.steps;
      } else if (r.steps == max_iter) {
        return r;
      }
    }
    if (r.escaped) {
      r.log_lead = lead;
      if (lead >= kLogHandoff) return r;
    }
    Pair<S> next = fwd ? f.apply(ts, z) : f.apply_inverse(ts, z);
    // log 0 = -inf is fine (orbit at the origin); NaN or +inf means overflow.
    if (!(std::max(log_abs(next.x), log_abs(next.y)) < HUGE_VAL)) return r;
    z = next;
    ++r.steps;
  }
}

GreenEnclosure non_escape_bound(double log_norm, double radius, double tail_c, double degree_power, int d) {
  GreenEnclosure g;
  g.lower = 0.0;
  g.upper = (std::max(log_norm, std::log(radius)) + tail_c / (d - 1)) / degree_power;
  return g;
}

}  // namespace

static GreenEnclosure finish_green(const EscapeData& e, Sign sign, const GreenOptions& opt, const PreEscape& pre);


EscapeData escape_data(const HenonFamily& f, cplx t) {
  f.check_parameter(t);
  EscapeData e;
  e.degree = f.degree();
  double a_max = 0.0, b_max = 0.0, delta_max = 0.0;
  for (const auto& fac : f.factors()) {
    const double low = lower_coeff_sum(fac, t);
    const double dl = std::abs(fac.delta(t));
    e.forward_coeff.push_back(low + dl);
    e.backward_coeff.push_back(low + 1.0);
    e.log_abs_delta.push_back(std::log(dl));
    e.degrees.push_back(fac.degree());
    a_max = std::max(a_max, low + dl);
    b_max = std::max(b_max, low + 1.0);
    delta_max = std::max(delta_max, dl);
  }
  e.radius = std::max(2.0, 2.0 * (1.0 + a_max));
  e.radius_minus = std::max({2.0, 2.0 * (1.0 + b_max), 4.0 * delta_max});
  const std::size_t k = e.degrees.size();
  // Forward: factor j is followed by factors j+1..k-1, backward by 0..j-1.
  for (std::size_t j = 0; j < k; ++j) {
    double after = 1.0, before = 1.0;
    for (std::size_t i = j + 1; i < k; ++i) after *= e.degrees[i];
    for (std::size_t i = 0; i < j; ++i) before *= e.degrees[i];
    e.tail_constant += after * std::log(2.0 + e.forward_coeff[j]);
    e.tail_constant_minus += before * (std::log(2.0 + e.backward_coeff[j]) + std::abs(e.log_abs_delta[j]));
  }
  verify_invariance(f, t, e);
  return e;
}

GreenEnclosure green(const HenonFamily& f, cplx t, Point z, Sign sign, const GreenOptions& opt) {
  return green(f, escape_data(f, t), t, z, sign, opt);
}

GreenEnclosure green(const HenonFamily& f, const EscapeData& e, cplx t, Point z, Sign sign, const GreenOptions& opt) {
  if (opt.quad_orbit) return green(f, e, t, Pair<QComplex>{QComplex(z.x), QComplex(z.y)}, sign, opt);
  return finish_green(e, sign, opt, pre_escape<cplx>(f, e, t, z, sign == Sign::Plus, opt.max_iter));
}

GreenEnclosure green(const HenonFamily& f, const EscapeData& e, cplx t, const Pair<QComplex>& z, Sign sign,
                     const GreenOptions& opt) {
  return finish_green(e, sign, opt, pre_escape<QComplex>(f, e, t, z, sign == Sign::Plus, opt.max_iter));
}

static GreenEnclosure finish_green(const EscapeData& e, Sign sign, const GreenOptions& opt, const PreEscape& pre) {
  const bool fwd = sign == Sign::Plus;
  const int d = e.degree;
  const double radius = fwd ? e.radius : e.radius_minus;
  const double tail_c = fwd ? e.tail_constant : e.tail_constant_minus;

  const int n = pre.steps;
  double power = std::pow(static_cast<double>(d), n);
  if (!pre.escaped) {
    auto g = non_escape_bound(pre.log_norm, radius, tail_c, power, d);
    g.iterations_used = n;
    return g;
  }

  // Log-magnitude tracking of the dominant coordinate inside the escape region.
  const double start = pre.log_lead;
  double lo = start, hi = start;
  const std::size_t k = e.degrees.size();
  int steps = n;
  double tail = tail_c / (power * (d - 1));
  while (tail > opt.tol && steps - n < kMaxLogSteps) {
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t j = fwd ? s : k - 1 - s;
      const double m = e.degrees[j];
      const double a = fwd ? e.forward_coeff[j] : e.backward_coeff[j];
      const double shift = fwd ? 0.0 : -e.log_abs_delta[j];
      const double r = a * std::exp(-lo);
      lo = m * lo + shift + std::log1p(-r);
      hi = m * hi + shift + std::log1p(r);
    }
    ++steps;
    power *= d;
    tail = tail_c / (power * (d - 1));
  }
  GreenEnclosure g;
  g.lower = std::max(0.0, lo / power - tail);
  g.upper = hi / power + tail;
  g.escaped_at = pre.escaped_at;
  g.iterations_used = steps;
  return g;
}

GreenEnclosure enclosure_max(const GreenEnclosure& a, const GreenEnclosure& b) {
  GreenEnclosure g;
  g.lower = std::max(a.lower, b.lower);
  g.upper = std::max(a.upper, b.upper);
  g.iterations_used = std::max(a.iterations_used, b.iterations_used);
  if (a.escaped_at && b.escaped_at) {
    g.escaped_at = std::min(*a.escaped_at, *b.escaped_at);
  } else if (a.escaped_at) {
    g.escaped_at = a.escaped_at;
  } else {
    g.escaped_at = b.escaped_at;
  }
  return g;
}

GreenEnclosure green_max(const HenonFamily& f, cplx t, Point z, const GreenOptions& opt) {
  return green_max(f, escape_data(f, t), t, z, opt);
}

GreenEnclosure green_max(const HenonFamily& f, const EscapeData& e, cplx t, Point z, const GreenOptions& opt) {
  return enclosure_max(green(f, e, t, z, Sign::Plus, opt), green(f, e, t, z, Sign::Minus, opt));
}

GreenEnclosure green_max(const HenonFamily& f, const EscapeData& e, cplx t, const Pair<QComplex>& z,
                         const GreenOptions& opt) {
  return enclosure_max(green(f, e, t, z, Sign::Plus, opt), green(f, e, t, z, Sign::Minus, opt));
}

JuliaMembership filled_julia_test(const HenonFamily& f, cplx t, Point z, double tol, const GreenOptions& opt) {
  const auto g = green(f, t, z, Sign::Plus, opt);
  if (g.lower > 0.0) return JuliaMembership::Outside;
  if (g.upper < tol) return JuliaMembership::Inside;
  return JuliaMembership::Unknown;
}

GreenRender render_green(const HenonFamily& f, cplx t, const PlaneSlice& slice, const Rect& rect, int nx, int ny,
                         const GreenOptions& opt, int threads) {
  if (nx <= 0 || ny <= 0) throw HenonError("render dimensions must be positive");
  const EscapeData e = escape_data(f, t);
  GreenRender out;
  out.grid = ValueGrid{rect, nx, ny, std::vector<double>(static_cast<std::size_t>(nx) * ny)};
  std::vector<double> widths(out.grid.values.size());
  parallel_for(out.grid.values.size(), threads, [&](std::size_t idx) {
    const int i = static_cast<int>(idx % nx), j = static_cast<int>(idx / nx);
    const auto g = green_max(f, e, t, slice.at(out.grid.node(i, j)), opt);
    out.grid.values[idx] = g.mid();
    widths[idx] = g.width();
  });
  for (double w : widths) out.max_width = std::max(out.max_width, w);
  return out;
}

void write_pgm16(const GreenRender& r, const std::filesystem::path& pgm, const std::filesystem::path& sidecar) {
  const auto& g = r.grid;
  double gmax = 0.0;
  for (double v : g.values) gmax = std::max(gmax, v);
  const double scale = gmax > 0.0 ? 65535.0 / gmax : 0.0;
  std::ofstream out(pgm, std::ios::binary);
  if (!out) throw HenonError("cannot write " + pgm.string());
  out << "P5\n" << g.nx << " " << g.ny << "\n65535\n";
  // Top row of the image is the largest imaginary part.
  for (int j = g.ny - 1; j >= 0; --j) {
    for (int i = 0; i < g.nx; ++i) {
      const auto s = static_cast<std::uint16_t>(std::lround(std::clamp(g.at(i, j) * scale, 0.0, 65535.0)));
      const char bytes[2] = {static_cast<char>(s >> 8), static_cast<char>(s & 0xff)};
      out.write(bytes, 2);
    }
  }
  nlohmann::json meta{{"format", "P5"},
                      {"bit_depth", 16},
                      {"byte_order", "big-endian"},
                      {"width", g.nx},
                      {"height", g.ny},
                      {"rect", {g.rect.re_min, g.rect.re_max, g.rect.im_min, g.rect.im_max}},
                      {"value_map", "sample = round(G / g_max * 65535)"},
                      {"g_max", gmax},
                      {"max_enclosure_width", r.max_width},
                      {"row_order", "first row is im_max"}};
  std::ofstream side(sidecar);
  if (!side) throw HenonError("cannot write " + sidecar.string());
  side << meta.dump(2) << "\n";
}

}  // namespace henon
