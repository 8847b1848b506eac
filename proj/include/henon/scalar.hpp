#pragma once

// Scalar backends for the generic map evaluators: double complex, forward-mode
// dual numbers, and a quad-precision complex used where deviations from a
// periodic point are far below double resolution.

#include <quadmath.h>

#include <cmath>
#include <complex>

#include "henon/types.hpp"

namespace henon {

/// First-order forward-mode dual number over C. Holomorphic maps are complex
/// differentiable, so a single complex tangent carries the full derivative.
struct Dual {
  cplx v{};
  cplx d{};

  Dual() = default;
  Dual(cplx value, cplx deriv = {}) : v(value), d(deriv) {}

  static Dual variable(cplx value) { return {value, 1.0}; }

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
};

/// Complex number over __float128 (113-bit mantissa).
struct QComplex {
  __float128 re = 0;
  __float128 im = 0;

  QComplex() = default;
  QComplex(__float128 r, __float128 i = 0) : re(r), im(i) {}
  QComplex(double r) : re(r), im(0) {}
  QComplex(cplx z) : re(z.real()), im(z.imag()) {}

  explicit operator cplx() const { return {static_cast<double>(re), static_cast<double>(im)}; }

  QComplex& operator+=(const QComplex& o) { re += o.re; im += o.im; return *this; }
  QComplex& operator-=(const QComplex& o) { re -= o.re; im -= o.im; return *this; }
  QComplex& operator*=(const QComplex& o) {
    __float128 r = re * o.re - im * o.im;
    im = re * o.im + im * o.re;
    re = r;
    return *this;
  }
  QComplex& operator/=(const QComplex& o) {
    __float128 den = o.re * o.re + o.im * o.im;
    __float128 r = (re * o.re + im * o.im) / den;
    im = (im * o.re - re * o.im) / den;
    re = r;
    return *this;
  }
  friend QComplex operator+(QComplex a, const QComplex& b) { return a += b; }
  friend QComplex operator-(QComplex a, const QComplex& b) { return a -= b; }
  friend QComplex operator*(QComplex a, const QComplex& b) { return a *= b; }
  friend QComplex operator/(QComplex a, const QComplex& b) { return a /= b; }
  friend QComplex operator-(const QComplex& a) { return {-a.re, -a.im}; }
  friend bool operator==(const QComplex& a, const QComplex& b) { return a.re == b.re && a.im == b.im; }
};

inline __float128 qabs(const QComplex& z) { return hypotq(z.re, z.im); }

inline QComplex qsqrt(const QComplex& z) {
  __float128 r = qabs(z);
  if (r == 0) return {};
  __float128 a = sqrtq((r + fabsq(z.re)) / 2);
  if (z.re >= 0) return {a, z.im / (2 * a)};
  return {fabsq(z.im) / (2 * a), z.im >= 0 ? a : -a};
}

inline QComplex qpow(QComplex z, int k) {
  QComplex r(1.0);
  for (int i = 0; i < k; ++i) r *= z;
  return r;
}

/// Embeds a double-complex coefficient into scalar type S.
template <class S>
struct Lift;

template <>
struct Lift<cplx> {
  static cplx from(cplx c) { return c; }
};
template <>
struct Lift<Dual> {
  static Dual from(cplx c) { return Dual(c); }
};
template <>
struct Lift<QComplex> {
  static QComplex from(cplx c) { return QComplex(c); }
};

template <class S>
S lift(cplx c) {
  return Lift<S>::from(c);
}

}  // namespace henon
