#include "henon/family.hpp"

#include <algorithm>
#include <array>

namespace henon {

namespace {

HenonFactor to_complex(const RationalFactor& rf) {
  HenonFactor f;
  for (const auto& c : rf.p) f.p.push_back(henon::to_complex(c));
  f.delta = henon::to_complex(rf.delta);
  return f;
}

}  // namespace

HenonFamily::HenonFamily(std::vector<HenonFactor> factors) : factors_(std::move(factors)) {
  validate();
  compute_excluded();
}

HenonFamily::HenonFamily(std::vector<RationalFactor> factors) {
  for (const auto& rf : factors) {
    if (rf.p.empty() || !rf.p.back().is_constant(mpq_class(1))) {
      throw InvalidFamily("factor polynomial must be monic with constant leading coefficient 1");
    }
    factors_.push_back(to_complex(rf));
  }
  rational_ = std::move(factors);
  validate();
  compute_excluded();
}

HenonFamily HenonFamily::quadratic(CPoly c, CPoly delta) {
  HenonFactor f;
  f.p = {std::move(c), CPoly(), CPoly(cplx(1.0))};
  f.delta = std::move(delta);
  return HenonFamily(std::vector<HenonFactor>{f});
}

HenonFamily HenonFamily::quadratic_t(cplx delta) {
  return quadratic(CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(delta));
}

HenonFamily HenonFamily::quadratic_t(const mpq_class& delta) {
  RationalFactor f;
  f.p = {QPoly(std::vector<mpq_class>{0, 1}), QPoly(), QPoly(mpq_class(1))};
  f.delta = QPoly(delta);
  return HenonFamily(std::vector<RationalFactor>{f});
}

const std::vector<RationalFactor>& HenonFamily::rational_factors() const {
  if (!rational_) throw BackendMismatch("family has floating-point coefficients; exact backend unavailable");
  return *rational_;
}

void HenonFamily::validate() const {
  if (factors_.empty()) throw InvalidFamily("family needs at least one factor");
  for (const auto& f : factors_) {
    if (f.degree() < 2) throw InvalidFamily("factor polynomial must have degree >= 2");
    if (!f.p.back().is_constant(cplx(1.0))) {
      throw InvalidFamily("factor polynomial must be monic with constant leading coefficient 1");
    }
    if (f.delta.is_zero()) throw InvalidFamily("delta must not vanish identically");
  }
}

void HenonFamily::compute_excluded() {
  degree_ = 1;
  for (const auto& f : factors_) degree_ *= f.degree();
  excluded_.clear();
  for (const auto& f : factors_) {
    auto r = poly_roots(f.delta.coeffs());
    excluded_.insert(excluded_.end(), r.begin(), r.end());
  }
}

void HenonFamily::check_parameter(cplx t) const {
  for (const auto& f : factors_) {
    const double scale = std::max(1.0, f.delta.abs_bound(std::abs(t)));
    if (std::abs(f.delta(t)) <= 1e-14 * scale) throw DegenerateParameter("delta vanishes at the parameter");
  }
}

QPoint HenonFamily::apply_exact(const mpq_class& t, const QPoint& z0) const {
  QPoint z = z0;
  for (const auto& f : rational_factors()) {
    mpq_class py = 0;
    for (auto it = f.p.rbegin(); it != f.p.rend(); ++it) py = py * z.y + (*it)(t);
    mpq_class dl = f.delta(t);
    if (sgn(dl) == 0) throw DegenerateParameter("delta vanishes at the parameter");
    QPoint next{z.y, py - dl * z.x};
    z = std::move(next);
  }
  return z;
}

QPoint HenonFamily::apply_inverse_exact(const mpq_class& t, const QPoint& z0) const {
  QPoint z = z0;
  const auto& fs = rational_factors();
  for (auto it = fs.rbegin(); it != fs.rend(); ++it) {
    mpq_class px = 0;
    for (auto c = it->p.rbegin(); c != it->p.rend(); ++c) px = px * z.x + (*c)(t);
    mpq_class dl = it->delta(t);
    if (sgn(dl) == 0) throw DegenerateParameter("delta vanishes at the parameter");
    QPoint next{mpq_class((px - z.y) / dl), z.x};
    z = std::move(next);
  }
  return z;
}

Point evaluate(const HenonFamily& f, cplx t, Point z) {
  f.check_parameter(t);
  return f.apply(t, z);
}

Point evaluate_inverse(const HenonFamily& f, cplx t, Point z) {
  f.check_parameter(t);
  return f.apply_inverse(t, z);
}

cplx jacobian(const HenonFamily& f, cplx t) {
  f.check_parameter(t);
  cplx j = 1.0;
  for (const auto& fac : f.factors()) j *= fac.delta(t);
  return j;
}

GlobalPeriodicity detect_global_periodicity(const HenonFamily& f, const MarkedPoint& sigma, int bound) {
  // Generic sample parameters; an identity in t must hold at each of them.
  static constexpr std::array<cplx, 4> kSamples{cplx(0.3712, 0.2137), cplx(-0.5311, 0.6173),
                                                cplx(0.7129, -0.4441), cplx(-0.2917, -0.8359)};
  std::vector<std::vector<Point>> orbits;
  for (cplx t : kSamples) {
    bool degenerate = false;
    for (cplx e : f.excluded_params()) degenerate = degenerate || std::abs(e - t) < 1e-9;
    if (degenerate) continue;
    std::vector<Point> orb{sigma(t)};
    for (int k = 1; k <= bound; ++k) {
      Point nz = f.apply(t, orb.back());
      if (!std::isfinite(norm_max(nz)) || norm_max(nz) > 1e12) break;
      orb.push_back(nz);
    }
    orbits.push_back(std::move(orb));
  }
  for (int m = 1; m <= bound; ++m) {
    for (int n = 0; n < m; ++n) {
      bool all = !orbits.empty();
      for (const auto& orb : orbits) {
        if (static_cast<int>(orb.size()) <= m) {
          all = false;
          break;
        }
        const double scale = 1.0 + norm_max(orb[static_cast<std::size_t>(m)]);
        if (norm_max(orb[static_cast<std::size_t>(m)] - orb[static_cast<std::size_t>(n)]) > 1e-9 * scale) {
          all = false;
          break;
        }
      }
      if (all) return {true, n, m};
    }
  }
  return {};
}

}  // namespace henon
