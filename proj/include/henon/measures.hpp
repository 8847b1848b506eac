#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "henon/green.hpp"

namespace henon {

/// Discrete Green measure on a parameter rectangle. Cell (i, j) is centered at
/// the same node as ValueGrid::node(i, j); boundary cells carry no mass.
struct GridMeasure {
  Rect rect;
  int nx = 0;
  int ny = 0;
  std::vector<double> cell_mass;
  double total = 0.0;
  double negative_mass = 0.0;  // sum of the negative cell masses (<= 0)

  double at(int i, int j) const { return cell_mass[static_cast<std::size_t>(j) * nx + i]; }
};

struct ProportionalityReport {
  double gamma = 0.0;
  double residual = 0.0;
  double harmonic_defect = 0.0;
};

struct MeasureOptions {
  GreenOptions green;
  int threads = 1;
  /// Enclosure widths above this multiple of the cell area make the Laplacian meaningless.
  double width_factor = 1e-2;
};

using MarkedFn = std::function<Point(cplx)>;

GreenEnclosure marked_green(const HenonFamily& f, const MarkedPoint& sigma, cplx t, Sign sign,
                            const GreenOptions& opt = {});

/// Samples of G(sign) at sigma(t) on the cell centers of the rectangle.
/// `max_width` receives the largest enclosure width when non-null.
ValueGrid marked_green_grid(const HenonFamily& f, const MarkedFn& sigma, Sign sign, const Rect& rect, int nx, int ny,
                            const MeasureOptions& opt = {}, double* max_width = nullptr);

/// (1/2pi) times the five-point Laplacian times the cell area, on interior nodes.
GridMeasure laplacian_measure(const ValueGrid& g);

/// Throws ResolutionTooCoarse when enclosure widths exceed width_factor * h^2.
GridMeasure measure_grid(const HenonFamily& f, const MarkedFn& sigma, Sign sign, const Rect& rect, int nx, int ny,
                         const MeasureOptions& opt = {});
GridMeasure measure_grid(const HenonFamily& f, const MarkedPoint& sigma, Sign sign, const Rect& rect, int nx, int ny,
                         const MeasureOptions& opt = {});

/// Least-squares gamma for mu_plus ~ gamma mu_minus, relative L1 misfit, and the
/// L1 Laplacian mass of g_plus - gamma g_minus. Throws DegenerateFit when the
/// total of mu_minus is below mass_tol.
ProportionalityReport proportionality_test(const GridMeasure& mu_plus, const GridMeasure& mu_minus,
                                           const ValueGrid& g_plus, const ValueGrid& g_minus,
                                           double mass_tol = 1e-8);

struct ParamSearch {
  int seeds_per_axis = 24;
  double tol = 1e-10;
  int max_iter = 80;
  int threads = 1;
};

/// Parameters t in rect with f_t^n(sigma(t)) = sigma(t), found by Gauss-Newton
/// in t from a seed grid. Throws PreconditionFailed for globally periodic sigma.
std::vector<cplx> periodic_params(const HenonFamily& f, const MarkedPoint& sigma, int n, const Rect& rect,
                                  const ParamSearch& opt = {});

/// Roots of x_n + y_n = 0 along the orbit of sigma(t) for a family reversible
/// under (x, y) -> (-y, -x), with sigma on the fixed line of that involution.
/// Each root is a parameter where sigma(t) has period dividing 2n.
std::vector<cplx> symmetric_periodic_params(const HenonFamily& f, const MarkedPoint& sigma, int n, const Rect& rect,
                                            const ParamSearch& opt = {});

/// Throws NotReversible when tau f_t tau = f_t^{-1} fails on sampled points.
void check_reversible(const HenonFamily& f, const Rect& rect);

struct EquiRow {
  int key = 0;
  std::size_t count = 0;
  double tv = 0.0;
};

/// Total-variation distance on a boxes x boxes partition between each group's
/// normalized counting measure and the normalized positive part of mu.
std::vector<EquiRow> equidistribution_report(const std::map<int, std::vector<cplx>>& groups, const GridMeasure& mu,
                                             int boxes = 8);
void write_equi_csv(std::ostream& out, const std::vector<EquiRow>& rows);

/// ".gmz": one line of JSON header, then row-major little-endian doubles.
void write_gmz(const std::filesystem::path& path, const GridMeasure& m);
GridMeasure read_gmz(const std::filesystem::path& path);

}  // namespace henon
