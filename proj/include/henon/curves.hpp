#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "henon/green.hpp"
#include "henon/quadratic.hpp"
#include "json.hpp"

namespace henon {

/// Polynomial in (t, w); c[k][j] is the coefficient of w^k t^j.
class BiPoly {
 public:
  BiPoly() = default;
  explicit BiPoly(std::vector<std::vector<cplx>> c);
  static BiPoly from_t(const CPoly& p);
  static BiPoly w();

  const std::vector<std::vector<cplx>>& coeffs() const { return c_; }
  int w_degree() const { return static_cast<int>(c_.size()) - 1; }

  cplx operator()(cplx t, cplx w) const;
  /// Partial derivative in w.
  cplx dw(cplx t, cplx w) const;

  friend BiPoly operator+(const BiPoly& a, const BiPoly& b);
  friend BiPoly operator-(const BiPoly& a, const BiPoly& b);
  friend BiPoly operator*(const BiPoly& a, const BiPoly& b);
  friend bool operator==(const BiPoly& a, const BiPoly& b) { return a.c_ == b.c_; }

 private:
  void trim();
  std::vector<std::vector<cplx>> c_;
};

/// Family of curves t -> {(x(t, w), y(t, w)) : w in w_domain}.
struct CurveFamily {
  BiPoly x;
  BiPoly y;
  Rect w_domain{-4.0, 4.0, -4.0, 4.0};

  Point at(cplx t, cplx w) const { return {x(t, w), y(t, w)}; }
  Point dw(cplx t, cplx w) const { return {x.dw(t, w), y.dw(t, w)}; }

  /// w -> (a w + b, c w + d) with constant coefficients.
  static CurveFamily line(cplx a, cplx b, cplx c, cplx d, Rect domain);
};

/// f(C): the curve reparameterized through one iterate, on the same w_domain.
CurveFamily image(const HenonFamily& f, const CurveFamily& c);

/// Throws InjectivityViolation when two grid nodes of some fiber collide.
void check_injective(const CurveFamily& c, const std::vector<cplx>& ts, int res = 24);

struct CurveOptions {
  GreenOptions green;
  int threads = 1;
};

struct FiberEnergy {
  double value = 0.0;
  /// Green lower bound positive on every boundary cell of the w-grid.
  bool boundary_flag = false;
  double max_width = 0.0;
};

/// max(G+, G-) sampled at curve points over the w-grid cell centers.
ValueGrid fiber_green(const HenonFamily& f, const CurveFamily& c, cplx t, int w_res, const CurveOptions& opt = {},
                      std::vector<double>* lower = nullptr, double* max_width = nullptr);

/// Integral of g dd^c g over the fiber, g the restricted Green function.
FiberEnergy fiber_energy(const HenonFamily& f, const CurveFamily& c, cplx t, int w_res, const CurveOptions& opt = {});

/// sup over the w-grid of |G+(z) - G-(tau z)| with tau(x, y) = (-y, -x).
double symmetry_defect(const HenonFamily& f, const CurveFamily& c, cplx t, int w_res, const CurveOptions& opt = {});

struct EnergyProfile {
  ValueGrid values;
  std::vector<bool> boundary_flags;
};

/// fiber_energy on the t-grid cell centers. Throws DegenerateParameter when the
/// rectangle contains an excluded parameter.
EnergyProfile energy_profile(const HenonFamily& f, const CurveFamily& c, const Rect& t_rect, int t_res, int w_res,
                             const CurveOptions& opt = {});

/// Discrete dd^c mass of a profile over its window (zero for degenerate windows).
double profile_mass(const ValueGrid& profile);

/// Window mass of dd^c of the fiber energy; a lower-bound stand-in for the family height.
double family_height(const HenonFamily& f, const CurveFamily& c, const Rect& t_rect, int t_res, int w_res,
                     const CurveOptions& opt = {});

struct NondegeneracyVerdict {
  bool nonzero = false;
  /// Largest window mass when nonzero; otherwise the tolerance it vanished within.
  double value = 0.0;
};

NondegeneracyVerdict nondegeneracy_probe(const HenonFamily& f, const CurveFamily& c, const std::vector<Rect>& windows,
                                         int t_res, int w_res, double mass_tol = 1e-3, const CurveOptions& opt = {});

struct SigmaReport {
  bool pass = true;
  bool vacuous = false;
  double r = 0.0;
  std::vector<double> distances;  // per sampled t
};

SigmaReport sigma_distance_check(const CurveFamily& c, cplx delta, const std::vector<cplx>& t_samples, double r,
                                 int w_res = 48);

CurveFamily curve_from_json(const nlohmann::json& j);
nlohmann::json curve_to_json(const CurveFamily& c);
void write_profile_csv(std::ostream& out, const EnergyProfile& p);

}  // namespace henon
