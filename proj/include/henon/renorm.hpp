#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "henon/green.hpp"
#include "henon/linalg.hpp"
#include "henon/scalar.hpp"
#include "json.hpp"

namespace henon {

struct FixedPointSample {
  cplx t;
  Point z;
  double residual = 0.0;
};

struct ContinuationOptions {
  int rays = 16;
  int rings = 4;
  /// Throws EigenvalueOne once min |lambda - 1| drops below this.
  double eigen_tol = 1e-6;
};

/// Fixed point followed along rays from t0 to every ring of the disk; each
/// sample is Newton-refined from the previous one on its ray. Element 0 is t0.
std::vector<FixedPointSample> continue_fixed_point(const HenonFamily& f, cplx t0, Point z0, double disk_radius,
                                                   const ContinuationOptions& opt = {});

/// Truncated power series w -> rho(w) with f_t(rho(w)) = rho(u w).
struct UnstableSeries {
  cplx t;
  cplx u;
  cplx s;
  std::vector<Point> coeffs;
  double w_test = 0.0;
  double defect = 0.0;

  Point operator()(cplx w) const;
  /// rho(w) for any w: evaluates at w / u^k inside w_test and pushes forward k times.
  Point extended(const HenonFamily& f, cplx w) const;
};

/// Solves the invariance equation order by order. w_test <= 0 picks the
/// validation radius where the last coefficient's contribution is below 1e-12.
UnstableSeries unstable_parametrization(const HenonFamily& f, cplx t, Point z, int order, double w_test = 0.0,
                                        double classify_eps = 1e-8);
/// Linear map z -> m z at the origin; every coefficient past the first vanishes.
UnstableSeries unstable_parametrization(const CMat2& m, int order, double w_test = 0.0, double classify_eps = 1e-8);
/// sup over |w| = w_test of ||f_t(rho(w)) - rho(u w)||.
double parametrization_defect(const HenonFamily& f, const UnstableSeries& rho, double w_test, int samples = 64);
void write_series_csv(std::ostream& out, const UnstableSeries& rho);

struct LocalSaddleData {
  cplx t0;
  Point sigma0;
  cplx u;
  cplx s;
  cplx lambda_u;
  cplx lambda_s;
  int q = 1;
  int p = 1;
};

/// Multipliers at a fixed point with principal q-th and p-th roots. No class check.
LocalSaddleData local_fixed_point_data(const HenonFamily& f, cplx t0, Point z0, int q = 1, int p = 1);

/// Marked point with quad-precision coefficients in powers of (t - center).
struct QMarkedPoint {
  cplx center;
  std::vector<Pair<QComplex>> coeffs;

  static QMarkedPoint from(const MarkedPoint& m, cplx center);
  /// Coefficients re-expanded at a new center.
  QMarkedPoint shifted(cplx new_center) const;
  /// Rounded to double and expanded in powers of t.
  MarkedPoint to_double() const;
};

/// Taylor coefficients at t0 of the continued fixed point, in quad precision.
std::vector<Pair<QComplex>> fixed_point_jet(const HenonFamily& f, cplx t0, Point z0, int order);

/// tau -> Phi(tau, tau) truncated to degree p - 1, where Phi(tau, w) is the germ of
/// unstable manifolds with f_{t0+tau}(Phi(tau, w)) = Phi(tau, u(tau) w). Its stable
/// coordinate vanishes to order p and its unstable coordinate to order 1.
QMarkedPoint adapted_marked_point(const HenonFamily& f, const LocalSaddleData& local, int p = 3);

struct RenormOptions {
  int n_min = 1;
  /// Pre-escape iterations granted on top of 2 n.
  int base_iter = 96;
  double green_tol = 1e-13;
  /// s_n is dropped, and the sequence truncated, once an enclosure is wider.
  double width_tol = 1e-8;
  bool check_periodicity = true;
  int jet_order = 8;
  int series_order = 20;
  int threads = 1;
};

struct RenormReport {
  std::string kind;  // "saddle" or "semi"
  double disk_radius = 0.0;
  cplx t0;
  cplx lambda;
  int q = 1;
  int n_min = 1;
  int n_max = 0;  // last n actually computed
  std::vector<cplx> samples;
  std::vector<std::vector<double>> values;  // values[n - n_min][sample]
  std::vector<double> max_width;
  std::vector<double> sup_diffs;  // sup |s_{n+1} - s_n|, n = n_min .. n_max - 1
  double fitted_ratio = 0.0;
  std::vector<double> backward_sup;
  cplx fit_constant_a;
  double fit_residual = 0.0;
  double nonconstancy = 0.0;
  std::optional<int> truncated_at;
};

/// t = 0 plus `rings` circles of radius k r / rings with per_ring angles each.
std::vector<cplx> disk_samples(double radius, int rings, int per_ring);

/// s_n(t) = d^n G+_{r_n(t)}(sigma(r_n(t))) with r_n(t) = t0 + t / lambda_u^n.
RenormReport renorm_sequence(const HenonFamily& f, const QMarkedPoint& sigma, const LocalSaddleData& local,
                             double disk_radius, int n_max, const std::vector<cplx>& t_samples,
                             const RenormOptions& opt = {});

/// Same sequence for |s| = 1 with a user-supplied rescaling lambda.
RenormReport semi_repelling_sequence(const HenonFamily& f, const QMarkedPoint& sigma, const LocalSaddleData& local,
                                     cplx lambda, double disk_radius, int n_max, const std::vector<cplx>& t_samples,
                                     const RenormOptions& opt = {}, double classify_eps = 1e-8);

/// exp of the least-squares slope of log(sup_diffs) against n; zero entries skipped.
double geometric_ratio(const std::vector<double>& diffs);

nlohmann::json to_json(const RenormReport& r);

/// Archived saddle run: (y, y^2 + t - 0.3 x) at t0 = -2 around (y+, y+), adapted
/// marked point with p = 3, disk radius 1e-2, 4 rings of 16 samples, n = 1..20.
RenormReport saddle_experiment(int threads = 1);
/// Archived semi-repelling run: (y, y^2 - 3/4 - t x) at t0 = -2 around (1/2, 1/2),
/// multipliers 2 and -1, lambda = 2, same disk and marked-point order, n = 1..16.
RenormReport semi_experiment(int threads = 1);

}  // namespace henon
