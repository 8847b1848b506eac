#pragma once

#include <gmpxx.h>

#include <optional>
#include <vector>

#include "henon/linalg.hpp"
#include "henon/param_poly.hpp"

namespace henon {

/// One generalized Hénon factor (x, y) -> (y, p_t(y) - delta(t) x).
/// p[i] is the coefficient of y^i as a polynomial in t; p.back() is the constant 1.
struct HenonFactor {
  std::vector<CPoly> p;
  CPoly delta;

  int degree() const { return static_cast<int>(p.size()) - 1; }
};

struct RationalFactor {
  std::vector<QPoly> p;
  QPoly delta;
};

using QPoint = Pair<mpq_class>;

/// Composition of generalized Hénon factors, applied left to right.
/// Immutable after construction.
class HenonFamily {
 public:
  explicit HenonFamily(std::vector<HenonFactor> factors);
  explicit HenonFamily(std::vector<RationalFactor> factors);

  /// (y, y^2 + c(t) - delta(t) x) with the given parameter polynomials.
  static HenonFamily quadratic(CPoly c, CPoly delta);
  /// Dissipative quadratic family (y, y^2 + t - delta x) with constant delta.
  static HenonFamily quadratic_t(cplx delta);
  /// Exact version of quadratic_t over Q.
  static HenonFamily quadratic_t(const mpq_class& delta);

  int degree() const { return degree_; }
  const std::vector<HenonFactor>& factors() const { return factors_; }
  bool is_rational() const { return rational_.has_value(); }
  /// Throws BackendMismatch for a floating family.
  const std::vector<RationalFactor>& rational_factors() const;
  const std::vector<cplx>& excluded_params() const { return excluded_; }

  /// Throws DegenerateParameter when some delta vanishes at t.
  void check_parameter(cplx t) const;

  /// Forward map over any scalar backend (no degeneracy check).
  template <class S>
  Pair<S> apply(const S& t, Pair<S> z) const {
    for (const auto& f : factors_) {
      S py = eval_p(f, t, z.y);
      S dl = f.delta(t);
      z = Pair<S>{z.y, py - dl * z.x};
    }
    return z;
  }

  template <class S>
  Pair<S> apply_inverse(const S& t, Pair<S> z) const {
    for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) {
      S px = eval_p(*it, t, z.x);
      S dl = it->delta(t);
      z = Pair<S>{(px - z.y) / dl, z.x};
    }
    return z;
  }

  /// n >= 0 forward iterates, n < 0 backward.
  template <class S>
  Pair<S> iterate(const S& t, Pair<S> z, int n) const {
    for (int i = 0; i < n; ++i) z = apply(t, z);
    for (int i = 0; i < -n; ++i) z = apply_inverse(t, z);
    return z;
  }

  /// Differential of the full map at z.
  template <class S>
  Mat2<S> differential(const S& t, Pair<S> z) const {
    Mat2<S> acc = Mat2<S>::identity();
    for (const auto& f : factors_) {
      S dp = eval_dp(f, t, z.y);
      S dl = f.delta(t);
      Mat2<S> df{lift<S>(0.0), lift<S>(1.0), -dl, dp};
      acc = df * acc;
      z = Pair<S>{z.y, eval_p(f, t, z.y) - dl * z.x};
    }
    return acc;
  }

  /// f(a + w) - f(a), evaluated without cancellation: every factor's polynomial
  /// difference is expanded as a Taylor series at the base point. Used to
  /// follow orbits that stay within rounding distance of a periodic point.
  template <class S>
  Pair<S> deviation(const S& t, Pair<S> base, Pair<S> w) const {
    for (const auto& f : factors_) {
      S dp = taylor_increment(f, t, base.y, w.y);
      S dl = f.delta(t);
      w = Pair<S>{w.y, dp - dl * w.x};
      base = Pair<S>{base.y, eval_p(f, t, base.y) - dl * base.x};
    }
    return w;
  }

  template <class S>
  Pair<S> deviation_inverse(const S& t, Pair<S> base, Pair<S> w) const {
    for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) {
      S dp = taylor_increment(*it, t, base.x, w.x);
      S dl = it->delta(t);
      w = Pair<S>{(dp - w.y) / dl, w.x};
      base = Pair<S>{(eval_p(*it, t, base.x) - base.y) / dl, base.x};
    }
    return w;
  }

  /// Exact forward/backward maps over Q. Throws BackendMismatch for float families.
  QPoint apply_exact(const mpq_class& t, const QPoint& z) const;
  QPoint apply_inverse_exact(const mpq_class& t, const QPoint& z) const;

 private:
  template <class S>
  static S eval_p(const HenonFactor& f, const S& t, const S& y) {
    S acc = lift<S>(0.0);
    for (auto it = f.p.rbegin(); it != f.p.rend(); ++it) acc = acc * y + (*it)(t);
    return acc;
  }
  template <class S>
  static S eval_dp(const HenonFactor& f, const S& t, const S& y) {
    S acc = lift<S>(0.0);
    for (std::size_t i = f.p.size() - 1; i >= 1; --i) {
      acc = acc * y + f.p[i](t) * lift<S>(static_cast<double>(i));
    }
    return acc;
  }
  /// p(a + w) - p(a) = sum_{k>=1} c_k(a) w^k via repeated synthetic division.
  template <class S>
  static S taylor_increment(const HenonFactor& f, const S& t, const S& a, const S& w) {
    std::vector<S> c;
    c.reserve(f.p.size());
    for (const auto& pi : f.p) c.push_back(pi(t));
    const std::size_t n = c.size();
    for (std::size_t k = 0; k + 1 < n; ++k) {
      for (std::size_t j = n - 2; j + 1 > k; --j) c[j] = c[j] + a * c[j + 1];
    }
    S acc = lift<S>(0.0);
    for (std::size_t k = n - 1; k >= 1; --k) acc = (acc + c[k]) * w;
    return acc;
  }

  void validate() const;
  void compute_excluded();

  std::vector<HenonFactor> factors_;
  std::optional<std::vector<RationalFactor>> rational_;
  std::vector<cplx> excluded_;
  int degree_ = 0;
};

/// f_t(z); throws DegenerateParameter.
Point evaluate(const HenonFamily& f, cplx t, Point z);
/// f_t^{-1}(z); throws DegenerateParameter.
Point evaluate_inverse(const HenonFamily& f, cplx t, Point z);
/// Product of the factor deltas at t.
cplx jacobian(const HenonFamily& f, cplx t);

/// sigma(t) = (a(t), b(t)).
struct MarkedPoint {
  CPoly a;
  CPoly b;

  Point operator()(cplx t) const { return {a(t), b(t)}; }
  template <class S>
  Pair<S> at(const S& t) const {
    return {a(t), b(t)};
  }
};

struct GlobalPeriodicity {
  bool periodic = false;
  int n = 0;
  int m = 0;
};

/// Advisory check whether f^n(sigma(t)) = f^m(sigma(t)) for all t with
/// 0 <= n < m <= bound. Evaluated on fixed generic sample parameters.
GlobalPeriodicity detect_global_periodicity(const HenonFamily& f, const MarkedPoint& sigma, int bound = 12);

}  // namespace henon
