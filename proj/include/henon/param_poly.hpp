#pragma once

#include <gmpxx.h>

#include <vector>

#include "henon/scalar.hpp"

namespace henon {

namespace detail {
inline bool is_zero(const cplx& c) { return c == cplx{}; }
inline bool is_zero(const mpq_class& q) { return sgn(q) == 0; }
}  // namespace detail

/// Polynomial in the family parameter t, coefficients indexed by power.
/// Trailing zeros are stripped on construction so equality is structural.
template <class T>
class ParamPoly {
 public:
  ParamPoly() = default;
  ParamPoly(std::vector<T> coeffs) : c_(std::move(coeffs)) { trim(); }
  ParamPoly(T constant) : c_{std::move(constant)} { trim(); }

  const std::vector<T>& coeffs() const { return c_; }
  bool is_zero() const { return c_.empty(); }
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_constant(const T& value) const {
    if (detail::is_zero(value)) return c_.empty();
    return c_.size() == 1 && c_[0] == value;
  }

  /// Horner evaluation. For double-complex coefficients the argument may be any
  /// scalar backend; rational coefficients evaluate exactly at rational t.
  template <class S>
  S operator()(const S& t) const {
    if constexpr (std::is_same_v<T, cplx>) {
      S acc = lift<S>(cplx{});
      for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + lift<S>(*it);
      return acc;
    } else {
      S acc = 0;
      for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + *it;
      return acc;
    }
  }

  /// Sum of coefficient magnitudes weighted by |t|^k, an upper bound for |p(t)|.
  double abs_bound(double abs_t) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * abs_t + magnitude(*it);
    return acc;
  }

  friend bool operator==(const ParamPoly& a, const ParamPoly& b) { return a.c_ == b.c_; }

 private:
  static double magnitude(const cplx& c) { return std::abs(c); }
  static double magnitude(const mpq_class& q) { return std::abs(q.get_d()); }

  void trim() {
    while (!c_.empty() && detail::is_zero(c_.back())) c_.pop_back();
  }

  std::vector<T> c_;
};

using CPoly = ParamPoly<cplx>;
using QPoly = ParamPoly<mpq_class>;

inline CPoly to_complex(const QPoly& q) {
  std::vector<cplx> c;
  c.reserve(q.coeffs().size());
  for (const auto& v : q.coeffs()) c.emplace_back(v.get_d(), 0.0);
  return CPoly(std::move(c));
}

}  // namespace henon
