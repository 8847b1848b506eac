#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "henon/types.hpp"
#include "json.hpp"

namespace henon {

/// Complex disk. Every operation widens the radius by 4 eps relative to the
/// result, the rounding model the certificates are stated against.
struct Ball {
  cplx c{};
  double r = 0.0;

  double abs_lower() const { return std::max(0.0, std::abs(c) - r); }
  double abs_upper() const { return std::abs(c) + r; }
  bool contains(cplx z) const { return std::abs(z - c) <= r; }
};

Ball operator+(const Ball& a, const Ball& b);
Ball operator-(const Ball& a, const Ball& b);
Ball operator*(const Ball& a, const Ball& b);

struct FixedPoints {
  cplx plus;
  cplx minus;
};

/// Roots of y^2 + t = (1 + delta) y, principal square root.
FixedPoints fixed_points(cplx delta, cplx t);
/// Fixed points and their three companions each, for (y, y^2 + t - delta x).
std::array<Point, 8> sigma_points(cplx delta, cplx t);
/// (y_a, y_b) for a, b in {+, -}.
std::array<Point, 4> julia_bidisk_centers(cplx delta, cplx t);

/// One cell of the 4-real-dimensional subdivision tree. Coordinates are integer
/// offsets at the cell's level, ordered (x_re, x_im, y_re, y_im).
struct CertCell {
  enum Status : std::uint8_t { Excluded = 0, Outside = 1, Forward = 2, Backward = 3, Failed = 4 };
  int level = 0;
  std::array<std::int64_t, 4> idx{};
  Status status = Failed;
  int steps = 0;
};

struct CertifyOptions {
  int threads = 1;
  /// Subdivision levels allowed below cell_size before a cell is declared failing.
  int extra_levels = 3;
  /// Abort with an Inconclusive verdict after this many cell evaluations.
  std::size_t max_cells = 200'000'000;
};

struct Certificate {
  cplx delta{};
  cplx t{};
  std::vector<Point> centers;
  double radius = 0.0;
  double cell_size = 0.0;
  int iterations = 0;
  double escape_radius = 0.0;        // forward filtration radius
  double escape_radius_minus = 0.0;  // backward filtration radius
  double region_radius = 0.0;        // a priori polydisk radius
  double root_size = 0.0;
  int roots_per_axis = 0;
  bool certified = false;
  bool aborted = false;
  std::size_t evaluated = 0;
  std::vector<CertCell> leaves;  // depth-first, roots in index order
  std::string digest;            // SHA-256 hex over the leaf list

  std::vector<CertCell> failing() const;
};

/// Certifies that no point of D(0, R)^2 outside the bidisks D(center, radius)
/// has a bounded two-sided orbit: each cell escapes forward into
/// {|y| >= max(|x|, R+)} or backward into {|x| >= max(|y|, R-)} within
/// `iterations` ball steps, with norm lower bound at least twice the radius.
Certificate certify_containment(cplx delta, cplx t, const std::vector<Point>& centers, double radius,
                                double cell_size, int iterations = 30, const CertifyOptions& opt = {});

struct ReplayReport {
  bool ok = false;
  bool digest_ok = false;
  bool coverage_ok = false;
  std::size_t sampled = 0;
  std::size_t mismatches = 0;
};

/// Recomputes the digest, checks the leaves tile the root box, and re-runs a
/// random fraction of the escaping leaves with separate long-double balls.
ReplayReport replay_certificate(const Certificate& c, double fraction = 0.01, std::uint64_t seed = 1);

nlohmann::json to_json(const Certificate& c);

struct RtEstimate {
  double r = 0.0;
  Certificate certificate;
  std::vector<std::pair<double, bool>> sweep;  // (radius, certified)
};

/// Smallest radius r_max 2^-k certified around the eight sigma points; the
/// sweep stops at the first failure. Throws SweepExhausted when r_max fails.
RtEstimate estimate_rt(cplx delta, cplx t, double cell_size, double r_max = 2.0, int max_halvings = 12,
                       int iterations = 30, const CertifyOptions& opt = {});

}  // namespace henon
