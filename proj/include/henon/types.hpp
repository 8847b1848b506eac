#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace henon {

using cplx = std::complex<double>;

/// A point of the affine plane over some scalar type.
template <class S>
struct Pair {
  S x{};
  S y{};

  friend Pair operator+(const Pair& a, const Pair& b) { return {a.x + b.x, a.y + b.y}; }
  friend Pair operator-(const Pair& a, const Pair& b) { return {a.x - b.x, a.y - b.y}; }
  friend bool operator==(const Pair& a, const Pair& b) { return a.x == b.x && a.y == b.y; }
};

using Point = Pair<cplx>;

/// Max-norm on C^2. Every escape estimate in the toolkit uses this norm.
inline double norm_max(const Point& z) { return std::max(std::abs(z.x), std::abs(z.y)); }

inline double dist_euclid(const Point& a, const Point& b) {
  return std::sqrt(std::norm(a.x - b.x) + std::norm(a.y - b.y));
}

enum class Sign { Plus, Minus };

/// Axis-aligned rectangle of the complex plane.
struct Rect {
  double re_min = -1.0;
  double re_max = 1.0;
  double im_min = -1.0;
  double im_max = 1.0;

  double width() const { return re_max - re_min; }
  double height() const { return im_max - im_min; }
  bool contains(cplx z) const {
    return z.real() >= re_min && z.real() <= re_max && z.imag() >= im_min && z.imag() <= im_max;
  }
};

// Errors. Every failure mode named in the contracts has its own type so callers
// can catch the soft ones (Inconclusive-style) separately from programming errors.
struct HenonError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateParameter : HenonError {
  using HenonError::HenonError;
};
struct InvalidFamily : HenonError {
  using HenonError::HenonError;
};
struct BackendMismatch : HenonError {
  using HenonError::HenonError;
};
struct NotPeriodic : HenonError {
  using HenonError::HenonError;
};
struct NoConvergence : HenonError {
  using HenonError::HenonError;
};
struct ResolutionTooCoarse : HenonError {
  using HenonError::HenonError;
};
struct DegenerateFit : HenonError {
  using HenonError::HenonError;
};
struct PreconditionFailed : HenonError {
  using HenonError::HenonError;
};
struct NotReversible : HenonError {
  using HenonError::HenonError;
};
struct BitBudgetExceeded : HenonError {
  using HenonError::HenonError;
};
struct InjectivityViolation : HenonError {
  using HenonError::HenonError;
};
struct SweepExhausted : HenonError {
  using HenonError::HenonError;
};
struct EigenvalueOne : HenonError {
  using HenonError::HenonError;
};
struct Resonance : HenonError {
  using HenonError::HenonError;
};
struct IllConditioned : HenonError {
  using HenonError::HenonError;
};
struct AmplifiedNoise : HenonError {
  using HenonError::HenonError;
};

}  // namespace henon
