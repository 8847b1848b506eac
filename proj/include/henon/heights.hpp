#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "henon/family.hpp"
#include "json.hpp"

namespace henon {

enum class HeightSign { Plus, Minus, Both };

struct HeightEstimate {
  double value = 0.0;
  double error = 0.0;
  int iterations = 0;
  double cauchy_constant = 0.0;
  bool periodic = false;
  /// h(f^{+-n}(p)) / d^n for n = 0..iterations (one direction only).
  std::vector<double> estimates;
  /// e_n = log(M_{n+1} / M_n^d) from the exact integers, so that
  /// estimates[n+1] - estimates[n] = e_n / d^{n+1} without cancellation.
  std::vector<double> defects;
};

struct HeightOptions {
  int n_max = 64;
  /// Per-coordinate cap on numerator/denominator size.
  std::size_t bit_budget = std::size_t{1} << 20;
  double safety = 10.0;
};

/// log max(|X|, |Y|, |Z|) for the primitive integer triple [X : Y : Z] = [x : y : 1].
double naive_height(const QPoint& p);
/// log max(|num|, |den|).
double naive_height(const mpq_class& t);

/// Canonical height by exact iteration. Throws BitBudgetExceeded when fewer
/// than three iterates fit in the budget; BackendMismatch for float families.
HeightEstimate canonical_height(const HenonFamily& f, const mpq_class& t, const QPoint& p, HeightSign sign,
                                const HeightOptions& opt = {});

/// |estimate_{n+2} - estimate_{n+1}| / |estimate_{n+1} - estimate_n| for each n;
/// NaN where both differences vanish.
std::vector<double> difference_ratios(const HeightEstimate& e, int degree);

struct HeightSample {
  mpq_class t;
  QPoint p;
};

struct InequalityReport {
  double c1 = 0.0;
  double c2 = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
  std::vector<double> slack1;  // (h(x) - hhat(x)) / (h(t) + 1)
  std::vector<double> slack2;  // (hhat(x) - 2 h(x)) / (h(t) + 1)
};

InequalityReport inequality_harness(const HenonFamily& f, const std::vector<HeightSample>& samples,
                                    const HeightOptions& opt = {}, int threads = 1);
nlohmann::json to_json(const InequalityReport& r);

/// num / den with num uniform in [-num_max, num_max] and den in [1, den_max],
/// numerator drawn first.
mpq_class random_rational(std::mt19937_64& rng, int num_max, int den_max);
/// Samples (t, (x, y)) drawn in that order from mt19937_64(seed).
std::vector<HeightSample> random_height_samples(int count, int num_max, int den_max, std::uint64_t seed);

void write_height_csv(std::ostream& out, const std::vector<HeightSample>& samples,
                      const std::vector<HeightEstimate>& estimates);

}  // namespace henon
