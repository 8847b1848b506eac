#include "henon/quadratic.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "henon/family.hpp"
#include "henon/green.hpp"
#include "henon/parallel.hpp"

namespace henon {

namespace {

constexpr double kInflate = 4.0 * std::numeric_limits<double>::epsilon();

Ball widen(cplx c, double r) { return {c, r + kInflate * (std::abs(c) + r)}; }

}  // namespace

Ball operator+(const Ball& a, const Ball& b) { return widen(a.c + b.c, a.r + b.r); }
Ball operator-(const Ball& a, const Ball& b) { return widen(a.c - b.c, a.r + b.r); }
Ball operator*(const Ball& a, const Ball& b) {
  return widen(a.c * b.c, std::abs(a.c) * b.r + std::abs(b.c) * a.r + a.r * b.r);
}

FixedPoints fixed_points(cplx delta, cplx t) {
  const cplx s = std::sqrt((1.0 + delta) * (1.0 + delta) - 4.0 * t);
  return {(1.0 + delta + s) / 2.0, (1.0 + delta - s) / 2.0};
}

std::array<Point, 8> sigma_points(cplx delta, cplx t) {
  const FixedPoints fp = fixed_points(delta, t);
  std::array<Point, 8> out;
  int k = 0;
  for (cplx y : {fp.plus, fp.minus}) {
    out[k++] = {y, y};
    out[k++] = {y - delta, y};
    out[k++] = {y, y - 1.0};
    out[k++] = {y - delta, y - 1.0};
  }
  return out;
}

std::array<Point, 4> julia_bidisk_centers(cplx delta, cplx t) {
  const FixedPoints fp = fixed_points(delta, t);
  return {Point{fp.plus, fp.plus}, Point{fp.plus, fp.minus}, Point{fp.minus, fp.plus}, Point{fp.minus, fp.minus}};
}

std::vector<CertCell> Certificate::failing() const {
  std::vector<CertCell> out;
  for (const auto& c : leaves) {
    if (c.status == CertCell::Failed) out.push_back(c);
  }
  return out;
}

namespace {

struct Geometry {
  double origin;  // lower corner of the root box on every axis
  double root_size;

  double size(int level) const { return std::ldexp(root_size, -level); }
  double lo(const CertCell& c, int axis) const { return origin + static_cast<double>(c.idx[axis]) * size(c.level); }
  cplx center(const CertCell& c, int axis_re) const {
    const double h = size(c.level) / 2.0;
    return {lo(c, axis_re) + h, lo(c, axis_re + 1) + h};
  }
};

struct Problem {
  cplx delta;
  cplx t;
  std::vector<Point> centers;
  double radius;
  double rplus;
  double rminus;
  double region;
  int iterations;
};

// Farthest and nearest distance from p to the axis-aligned square [lo, lo + s]^2.
double far_dist(cplx p, double lo_re, double lo_im, double s) {
  const double dx = std::max(std::abs(p.real() - lo_re), std::abs(p.real() - lo_re - s));
  const double dy = std::max(std::abs(p.imag() - lo_im), std::abs(p.imag() - lo_im - s));
  return std::hypot(dx, dy);
}
double near_dist(cplx p, double lo_re, double lo_im, double s) {
  const double dx = std::max({0.0, lo_re - p.real(), p.real() - lo_re - s});
  const double dy = std::max({0.0, lo_im - p.imag(), p.imag() - lo_im - s});
  return std::hypot(dx, dy);
}

bool forward_ok(const Ball& x, const Ball& y, double R) {
  return y.abs_lower() >= std::max(x.abs_upper(), R) && y.abs_lower() >= 2.0 * R;
}
bool backward_ok(const Ball& x, const Ball& y, double R) {
  return x.abs_lower() >= std::max(y.abs_upper(), R) && x.abs_lower() >= 2.0 * R;
}
bool finite(const Ball& b) { return std::isfinite(b.r) && std::isfinite(b.c.real()) && std::isfinite(b.c.imag()); }

void classify(const Problem& pb, const Geometry& g, CertCell& cell) {
  const double s = g.size(cell.level);
  const double xr = g.lo(cell, 0), xi = g.lo(cell, 1), yr = g.lo(cell, 2), yi = g.lo(cell, 3);
  if (near_dist(0.0, xr, xi, s) >= pb.region || near_dist(0.0, yr, yi, s) >= pb.region) {
    cell.status = CertCell::Outside;
    return;
  }
  for (const Point& c : pb.centers) {
    if (far_dist(c.x, xr, xi, s) < pb.radius && far_dist(c.y, yr, yi, s) < pb.radius) {
      cell.status = CertCell::Excluded;
      return;
    }
  }
  const double half_diag = s * std::sqrt(0.5);
  const Ball x0 = widen(g.center(cell, 0), half_diag);
  const Ball y0 = widen(g.center(cell, 2), half_diag);
  const Ball tb{pb.t, 0.0};
  const Ball db{pb.delta, 0.0};
  const Ball inv_d = widen(1.0 / pb.delta, 0.0);

  Ball x = x0, y = y0;
  for (int n = 0; n <= pb.iterations && finite(x) && finite(y); ++n) {
    if (forward_ok(x, y, pb.rplus)) {
      cell.status = CertCell::Forward;
      cell.steps = n;
      return;
    }
    Ball ny = y * y + tb - db * x;
    x = y;
    y = ny;
  }
  x = x0;
  y = y0;
  for (int n = 0; n <= pb.iterations && finite(x) && finite(y); ++n) {
    if (backward_ok(x, y, pb.rminus)) {
      cell.status = CertCell::Backward;
      cell.steps = n;
      return;
    }
    Ball nx = (x * x + tb - y) * inv_d;
    y = x;
    x = nx;
  }
  cell.status = CertCell::Failed;
}

// Parameters first so a digest cannot be reused for another problem.
std::string sha256_leaves(const Certificate& cert) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<double> head{cert.delta.real(), cert.delta.imag(), cert.t.real(), cert.t.imag(), cert.radius,
                           cert.cell_size, cert.root_size, static_cast<double>(cert.roots_per_axis),
                           static_cast<double>(cert.iterations)};
  for (const auto& p : cert.centers) head.insert(head.end(), {p.x.real(), p.x.imag(), p.y.real(), p.y.imag()});
  EVP_DigestUpdate(ctx, head.data(), head.size() * sizeof(double));
  for (const auto& c : cert.leaves) {
    unsigned char buf[4 + 32 + 1 + 4];
    std::int32_t lv = c.level, st = c.steps;
    std::memcpy(buf, &lv, 4);
    std::memcpy(buf + 4, c.idx.data(), 32);
    buf[36] = c.status;
    std::memcpy(buf + 37, &st, 4);
    EVP_DigestUpdate(ctx, buf, sizeof buf);
  }
  unsigned char md[32];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

Problem make_problem(cplx delta, cplx t, const std::vector<Point>& centers, double radius, int iterations) {
  if (!(std::abs(delta) < 1.0) || delta == cplx{}) throw PreconditionFailed("certification needs 0 < |delta| < 1");
  const HenonFamily f = HenonFamily::quadratic_t(delta);
  const EscapeData esc = escape_data(f, t);
  return {delta, t, centers, radius, esc.radius, esc.radius_minus, std::max(esc.radius, esc.radius_minus), iterations};
}

}  // namespace

Certificate certify_containment(cplx delta, cplx t, const std::vector<Point>& centers, double radius,
                                double cell_size, int iterations, const CertifyOptions& opt) {
  if (!(cell_size > 0.0)) throw PreconditionFailed("cell_size must be positive");
  if (iterations < 0) throw PreconditionFailed("iterations must be nonnegative");
  const Problem pb = make_problem(delta, t, centers, radius, iterations);

  Certificate cert;
  cert.delta = delta;
  cert.t = t;
  cert.centers = centers;
  cert.radius = radius;
  cert.cell_size = cell_size;
  cert.iterations = iterations;
  cert.escape_radius = pb.rplus;
  cert.escape_radius_minus = pb.rminus;
  cert.region_radius = pb.region;

  // Roots: at most four per axis, with a size that is cell_size times a power of two.
  int top = 0;
  while (std::ldexp(cell_size, top) * 4.0 < 2.0 * pb.region) ++top;
  cert.root_size = std::ldexp(cell_size, top);
  cert.roots_per_axis = static_cast<int>(std::ceil(2.0 * pb.region / cert.root_size));
  const Geometry g{-cert.root_size * cert.roots_per_axis / 2.0, cert.root_size};
  const int max_level = top + opt.extra_levels;

  const int n = cert.roots_per_axis;
  const std::size_t roots = static_cast<std::size_t>(n) * n * n * n;
  std::vector<std::vector<CertCell>> per_root(roots);
  std::vector<std::size_t> counts(roots, 0);
  std::atomic<std::size_t> total{0};
  std::atomic<bool> abort{false};
  parallel_for(roots, opt.threads, [&](std::size_t r) {
    CertCell root;
    std::size_t rem = r;
    for (int a = 0; a < 4; ++a) {
      root.idx[a] = static_cast<std::int64_t>(rem % n);
      rem /= n;
    }
    std::vector<CertCell> stack{root};
    while (!stack.empty()) {
      CertCell c = stack.back();
      stack.pop_back();
      if (abort.load(std::memory_order_relaxed)) {
        c.status = CertCell::Failed;
        per_root[r].push_back(c);
        continue;
      }
      classify(pb, g, c);
      ++counts[r];
      if (total.fetch_add(1, std::memory_order_relaxed) + 1 >= opt.max_cells) abort = true;
      if (c.status != CertCell::Failed || c.level >= max_level) {
        per_root[r].push_back(c);
        continue;
      }
      // Children pushed in reverse so they pop in index order.
      for (int k = 15; k >= 0; --k) {
        CertCell ch;
        ch.level = c.level + 1;
        for (int a = 0; a < 4; ++a) ch.idx[a] = 2 * c.idx[a] + ((k >> a) & 1);
        stack.push_back(ch);
      }
    }
  });
  for (std::size_t r = 0; r < roots; ++r) {
    cert.evaluated += counts[r];
    cert.leaves.insert(cert.leaves.end(), per_root[r].begin(), per_root[r].end());
  }
  cert.aborted = abort.load();
  cert.certified = !cert.aborted;
  for (const auto& c : cert.leaves) {
    if (c.status == CertCell::Failed) cert.certified = false;
  }
  cert.digest = sha256_leaves(cert);
  return cert;
}

namespace {

// Separate long-double ball iteration for replay; shares only the rounding model.
struct LBall {
  std::complex<long double> c;
  long double r;
};

LBall lwiden(std::complex<long double> c, long double r) {
  return {c, r + static_cast<long double>(kInflate) * (std::abs(c) + r)};
}
LBall ladd(const LBall& a, const LBall& b) { return lwiden(a.c + b.c, a.r + b.r); }
LBall lsub(const LBall& a, const LBall& b) { return lwiden(a.c - b.c, a.r + b.r); }
LBall lmul(const LBall& a, const LBall& b) {
  return lwiden(a.c * b.c, std::abs(a.c) * b.r + std::abs(b.c) * a.r + a.r * b.r);
}
long double lo_abs(const LBall& b) { return std::max<long double>(0.0L, std::abs(b.c) - b.r); }
long double hi_abs(const LBall& b) { return std::abs(b.c) + b.r; }

bool replay_cell(const Certificate& cert, const CertCell& cell) {
  const long double size = std::ldexp(static_cast<long double>(cert.root_size), -cell.level);
  const long double origin = -static_cast<long double>(cert.root_size) * cert.roots_per_axis / 2.0L;
  auto corner = [&](int a) { return origin + static_cast<long double>(cell.idx[a]) * size; };
  const long double hd = size * std::sqrt(0.5L);
  LBall x = lwiden({corner(0) + size / 2, corner(1) + size / 2}, hd);
  LBall y = lwiden({corner(2) + size / 2, corner(3) + size / 2}, hd);
  const LBall t{std::complex<long double>(cert.t), 0.0L};
  const LBall d{std::complex<long double>(cert.delta), 0.0L};
  const LBall inv{1.0L / std::complex<long double>(cert.delta), 0.0L};
  for (int n = 0; n < cell.steps; ++n) {
    if (cell.status == CertCell::Forward) {
      LBall ny = lsub(ladd(lmul(y, y), t), lmul(d, x));
      x = y;
      y = ny;
    } else {
      LBall nx = lmul(lsub(ladd(lmul(x, x), t), y), inv);
      y = x;
      x = nx;
    }
  }
  if (cell.status == CertCell::Forward) {
    const long double R = cert.escape_radius;
    return lo_abs(y) >= std::max(hi_abs(x), R) && lo_abs(y) >= 2 * R;
  }
  const long double R = cert.escape_radius_minus;
  return lo_abs(x) >= std::max(hi_abs(y), R) && lo_abs(x) >= 2 * R;
}

}  // namespace

ReplayReport replay_certificate(const Certificate& c, double fraction, std::uint64_t seed) {
  ReplayReport rep;
  rep.digest_ok = sha256_leaves(c) == c.digest;
  // Leaves of a complete tree have volumes summing to the root count.
  long double vol = 0.0L;
  for (const auto& l : c.leaves) vol += std::ldexp(1.0L, -4 * l.level);
  const long double roots = std::pow(static_cast<long double>(c.roots_per_axis), 4);
  rep.coverage_ok = std::abs(vol - roots) <= 1e-12L * roots;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& l : c.leaves) {
    if (l.status != CertCell::Forward && l.status != CertCell::Backward) continue;
    if (u(rng) >= fraction) continue;
    ++rep.sampled;
    if (!replay_cell(c, l)) ++rep.mismatches;
  }
  rep.ok = rep.digest_ok && rep.coverage_ok && rep.mismatches == 0;
  return rep;
}

nlohmann::json to_json(const Certificate& c) {
  auto cj = [](cplx z) { return nlohmann::json::array({z.real(), z.imag()}); };
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& p : c.centers) centers.push_back({cj(p.x), cj(p.y)});
  std::size_t counts[5] = {0, 0, 0, 0, 0};
  for (const auto& l : c.leaves) ++counts[l.status];
  nlohmann::json failing = nlohmann::json::array();
  for (const auto& l : c.failing()) {
    if (failing.size() >= 100) break;
    failing.push_back({{"level", l.level}, {"idx", l.idx}});
  }
  return {{"delta", cj(c.delta)},
          {"t", cj(c.t)},
          {"region", {{"polydisk_radius", c.region_radius}, {"bidisk_centers", centers}, {"bidisk_radius", c.radius}}},
          {"escape_radius", c.escape_radius},
          {"escape_radius_minus", c.escape_radius_minus},
          {"cell_size", c.cell_size},
          {"root_size", c.root_size},
          {"roots_per_axis", c.roots_per_axis},
          {"iterations", c.iterations},
          {"verdict", c.certified ? "Certified" : "Inconclusive"},
          {"aborted", c.aborted},
          {"evaluated", c.evaluated},
          {"leaves",
           {{"total", c.leaves.size()},
            {"excluded", counts[CertCell::Excluded]},
            {"outside", counts[CertCell::Outside]},
            {"forward", counts[CertCell::Forward]},
            {"backward", counts[CertCell::Backward]},
            {"failed", counts[CertCell::Failed]}}},
          {"failing_cells", failing},
          {"digest", c.digest},
          {"rounding_model", "rigorous up to 4 eps relative inflation per ball operation"}};
}

RtEstimate estimate_rt(cplx delta, cplx t, double cell_size, double r_max, int max_halvings, int iterations,
                       const CertifyOptions& opt) {
  if (!(std::abs(delta) < 1.0)) throw PreconditionFailed("estimate_rt needs |delta| < 1");
  const auto sp = sigma_points(delta, t);
  const std::vector<Point> centers(sp.begin(), sp.end());
  RtEstimate out;
  for (int k = 0; k <= max_halvings; ++k) {
    const double r = std::ldexp(r_max, -k);
    Certificate c = certify_containment(delta, t, centers, r, cell_size, iterations, opt);
    out.sweep.emplace_back(r, c.certified);
    if (!c.certified) break;
    out.r = r;
    out.certificate = std::move(c);
  }
  if (out.sweep.empty() || !out.sweep.front().second) throw SweepExhausted("largest radius is not certified");
  return out;
}

}  // namespace henon
