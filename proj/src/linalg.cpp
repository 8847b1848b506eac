#include "henon/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>

namespace henon {

std::pair<cplx, cplx> eigenvalues(const CMat2& m) {
  const cplx tr = m.trace();
  const cplx det = m.det();
  const cplx disc = std::sqrt(tr * tr - 4.0 * det);
  // Avoid cancellation: compute the larger root directly, the other from det.
  cplx big = (std::abs(tr + disc) >= std::abs(tr - disc)) ? (tr + disc) / 2.0 : (tr - disc) / 2.0;
  cplx small = (big == cplx{}) ? cplx{} : det / big;
  if (std::abs(small) > std::abs(big)) std::swap(big, small);
  return {big, small};
}

Point eigenvector(const CMat2& m, cplx lambda) {
  // (m - lambda) v = 0; pick the better-conditioned row.
  Point v;
  const cplx r1 = m.a - lambda, r2 = m.d - lambda;
  if (std::abs(m.b) + std::abs(r1) >= std::abs(m.c) + std::abs(r2)) {
    v = {m.b, -r1};
  } else {
    v = {-r2, m.c};
  }
  if (v.x == cplx{} && v.y == cplx{}) v = {1.0, 0.0};
  double n = std::sqrt(std::norm(v.x) + std::norm(v.y));
  v.x /= n;
  v.y /= n;
  const cplx lead = (std::abs(v.x) > 1e-300) ? v.x : v.y;
  const cplx phase = std::conj(lead) / std::abs(lead);
  v.x *= phase;
  v.y *= phase;
  return v;
}

Point solve(const CMat2& m, const Point& rhs, double rel_tol) {
  const cplx det = m.det();
  const double scale = std::max({std::abs(m.a), std::abs(m.b), std::abs(m.c), std::abs(m.d), 1e-300});
  if (std::abs(det) <= rel_tol * scale * scale) throw IllConditioned("singular 2x2 system");
  return {(m.d * rhs.x - m.b * rhs.y) / det, (m.a * rhs.y - m.c * rhs.x) / det};
}

std::vector<cplx> poly_roots(std::span<const cplx> coeffs) {
  std::vector<cplx> c(coeffs.begin(), coeffs.end());
  while (!c.empty() && c.back() == cplx{}) c.pop_back();
  // Zero roots factor out first.
  std::vector<cplx> roots;
  std::size_t lead_zero = 0;
  while (lead_zero < c.size() && c[lead_zero] == cplx{}) ++lead_zero;
  for (std::size_t i = 0; i < lead_zero; ++i) roots.emplace_back(0.0, 0.0);
  c.erase(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(lead_zero));
  const int n = static_cast<int>(c.size()) - 1;
  if (n <= 0) return roots;
  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) comp(i, n - 1) = -c[static_cast<std::size_t>(i)] / c.back();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp, false);
  for (int i = 0; i < n; ++i) roots.push_back(es.eigenvalues()(i));
  std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return roots;
}

}  // namespace henon
