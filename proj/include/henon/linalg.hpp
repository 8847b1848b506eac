#pragma once

#include <span>
#include <utility>
#include <vector>

#include "henon/types.hpp"

namespace henon {

/// 2x2 matrix [[a, b], [c, d]].
template <class S>
struct Mat2 {
  S a{}, b{}, c{}, d{};

  static Mat2 identity() { return {S(1.0), S(0.0), S(0.0), S(1.0)}; }

  friend Mat2 operator*(const Mat2& m, const Mat2& n) {
    return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d, m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
  }
  friend Pair<S> operator*(const Mat2& m, const Pair<S>& v) { return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y}; }

  S det() const { return a * d - b * c; }
  S trace() const { return a + d; }
};

using CMat2 = Mat2<cplx>;

/// Eigenvalues of a complex 2x2 matrix ordered by decreasing modulus.
std::pair<cplx, cplx> eigenvalues(const CMat2& m);

/// Unit eigenvector for eigenvalue lambda, normalized so that its first
/// nonzero coordinate is real positive.
Point eigenvector(const CMat2& m, cplx lambda);

/// Solves m * v = rhs; throws IllConditioned when |det| is below tol relative.
Point solve(const CMat2& m, const Point& rhs, double rel_tol = 1e-14);

/// Roots of sum_k coeffs[k] t^k via companion-matrix eigenvalues.
std::vector<cplx> poly_roots(std::span<const cplx> coeffs);

}  // namespace henon
