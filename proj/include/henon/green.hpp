#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "henon/family.hpp"

namespace henon {

/// Certified interval for a Green function value. The true value lies in
/// [lower, upper] up to floating-point rounding of the orbit itself.
struct GreenEnclosure {
  double lower = 0.0;
  double upper = 0.0;
  std::optional<int> escaped_at;
  int iterations_used = 0;

  double mid() const { return 0.5 * (lower + upper); }
  double width() const { return upper - lower; }
};

/// Filtration data at a fixed parameter. Points with |y| >= max(|x|, radius)
/// escape forward; points with |x| >= max(|y|, radius_minus) escape backward.
struct EscapeData {
  double radius = 0.0;
  double tail_constant = 0.0;
  double radius_minus = 0.0;
  double tail_constant_minus = 0.0;
  /// Per-factor log-discrepancy coefficients (forward and backward).
  std::vector<double> forward_coeff;
  std::vector<double> backward_coeff;
  std::vector<double> log_abs_delta;
  std::vector<int> degrees;
  int degree = 2;
};

struct GreenOptions {
  int max_iter = 64;
  double tol = 1e-9;
  /// Follow the orbit in quad precision until it escapes; slower, but keeps
  /// repelling periodic orbits from drifting off for twice as many steps.
  bool quad_orbit = false;
};

/// Radius and tail constants; verifies the escape invariant on random samples
/// at construction and throws HenonError if it fails.
EscapeData escape_data(const HenonFamily& f, cplx t);

GreenEnclosure green(const HenonFamily& f, cplx t, Point z, Sign sign, const GreenOptions& opt = {});
GreenEnclosure green(const HenonFamily& f, const EscapeData& esc, cplx t, Point z, Sign sign,
                     const GreenOptions& opt = {});
/// Starts from a quad-precision point and follows the orbit in quad precision.
GreenEnclosure green(const HenonFamily& f, const EscapeData& esc, cplx t, const Pair<QComplex>& z, Sign sign,
                     const GreenOptions& opt = {});

/// Interval max of the forward and backward enclosures.
GreenEnclosure green_max(const HenonFamily& f, cplx t, Point z, const GreenOptions& opt = {});
GreenEnclosure green_max(const HenonFamily& f, const EscapeData& esc, cplx t, Point z, const GreenOptions& opt = {});
GreenEnclosure green_max(const HenonFamily& f, const EscapeData& esc, cplx t, const Pair<QComplex>& z,
                         const GreenOptions& opt = {});
GreenEnclosure enclosure_max(const GreenEnclosure& a, const GreenEnclosure& b);

enum class JuliaMembership { Inside, Outside, Unknown };

JuliaMembership filled_julia_test(const HenonFamily& f, cplx t, Point z, double tol = 1e-9,
                                  const GreenOptions& opt = {});

/// Row-major grid of real samples over a rectangle; sample (i, j) sits at the
/// cell center re_min + (i + 1/2) h_re, im_min + (j + 1/2) h_im.
struct ValueGrid {
  Rect rect;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  double hx() const { return rect.width() / nx; }
  double hy() const { return rect.height() / ny; }
  cplx node(int i, int j) const {
    return {rect.re_min + (i + 0.5) * hx(), rect.im_min + (j + 0.5) * hy()};
  }
  double& at(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
};

/// Plane slice through C^2 used for renders: z = origin + u * dir_u + v * dir_v
/// for (u, v) ranging over the rectangle (u real part, v imaginary part).
struct PlaneSlice {
  Point origin{0.0, 0.0};
  Point dir_u{0.0, 1.0};
  Point dir_v{0.0, cplx(0.0, 1.0)};

  Point at(cplx uv) const {
    return {origin.x + uv.real() * dir_u.x + uv.imag() * dir_v.x, origin.y + uv.real() * dir_u.y + uv.imag() * dir_v.y};
  }
};

struct GreenRender {
  ValueGrid grid;
  double max_width = 0.0;
};

GreenRender render_green(const HenonFamily& f, cplx t, const PlaneSlice& slice, const Rect& rect, int nx, int ny,
                         const GreenOptions& opt = {}, int threads = 1);

/// Writes a 16-bit binary PGM (big-endian samples, value = clamp(G / G_max * 65535))
/// plus a JSON sidecar describing the value map, rectangle and enclosure widths.
void write_pgm16(const GreenRender& r, const std::filesystem::path& pgm, const std::filesystem::path& sidecar);

}  // namespace henon
