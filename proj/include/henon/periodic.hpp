#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "henon/family.hpp"

namespace henon {

struct MultiplierPair {
  cplx u;  // larger modulus
  cplx s;
};

enum class PeriodicClass { Saddle, SemiRepelling, SemiAttracting, Repelling, Attracting, Neutral };

std::string to_string(PeriodicClass c);

struct PeriodicRecord {
  cplx t;
  Point z;
  int period = 1;
  MultiplierPair multipliers;
  PeriodicClass cls = PeriodicClass::Neutral;
  double residual = 0.0;
  double classify_eps = 1e-8;
};

/// Product box in C^2: x ranges over box_x and y over box_y.
struct SearchBox {
  Rect x;
  Rect y;
};

struct PeriodicSearch {
  int seeds_per_axis = 6;
  double tol = 1e-13;
  int max_newton = 60;
  double classify_eps = 1e-8;
  int threads = 1;
  /// Extra Newton seeds, typically points of lower-period orbits.
  std::vector<Point> extra_seeds;
};

/// One record per periodic orbit of minimal period k, represented by the
/// lexicographically smallest orbit point.
std::vector<PeriodicRecord> find_periodic(const HenonFamily& f, cplx t, int k, const SearchBox& box,
                                          const PeriodicSearch& opt = {});

/// All points of the orbit of a k-periodic point, starting at z.
std::vector<Point> orbit_points(const HenonFamily& f, cplx t, Point z, int k);

/// Newton polish of a k-periodic point in quad precision.
Pair<QComplex> refine_periodic_quad(const HenonFamily& f, cplx t, Point z, int k, int steps = 4);

/// Differential of f^k at z (product along the orbit).
CMat2 differential_iterate(const HenonFamily& f, cplx t, Point z, int k);

/// Throws NotPeriodic when ||f^k(z) - z|| > residual_tol (1 + ||z||).
MultiplierPair multipliers(const HenonFamily& f, cplx t, Point z, int k, double residual_tol = 1e-8);
MultiplierPair multipliers_of(const CMat2& m);

PeriodicClass classify(const MultiplierPair& m, double eps = 1e-8);

void write_periodic_csv(std::ostream& out, const std::vector<PeriodicRecord>& records);

}  // namespace henon
