#include "henon/heights.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>

#include "henon/family_io.hpp"
#include "henon/parallel.hpp"

namespace henon {

namespace {

// Natural log of a positive integer without overflow.
double log_mpz(const mpz_class& z) {
  if (sgn(z) == 0) return -HUGE_VAL;
  long exp = 0;
  const double mant = mpz_get_d_2exp(&exp, z.get_mpz_t());
  return std::log(std::abs(mant)) + static_cast<double>(exp) * std::log(2.0);
}

// Primitive integer coordinates of [x : y : 1]; returns max(|X|, |Y|, |Z|).
mpz_class height_max(const QPoint& p) {
  mpz_class z;
  mpz_lcm(z.get_mpz_t(), p.x.get_den_mpz_t(), p.y.get_den_mpz_t());
  const mpz_class X = p.x.get_num() * (z / p.x.get_den());
  const mpz_class Y = p.y.get_num() * (z / p.y.get_den());
  // gcd(X, Y, Z) = 1 already: each prime of Z divides some denominator exactly
  // to its full power, and the corresponding numerator is coprime to it.
  mpz_class m = abs(X);
  if (abs(Y) > m) m = abs(Y);
  if (z > m) m = z;
  return m;
}

// log(a / b) for positive integers, keeping relative accuracy when a ~ b.
double log_ratio(const mpz_class& a, const mpz_class& b) {
  const mpz_class diff = a - b;
  if (sgn(diff) == 0) return 0.0;
  long ea = 0, eb = 0;
  const double ma = mpz_get_d_2exp(&ea, diff.get_mpz_t());
  const double mb = mpz_get_d_2exp(&eb, b.get_mpz_t());
  const double q = std::ldexp(ma / mb, static_cast<int>(std::clamp(ea - eb, -100000L, 100000L)));
  if (std::abs(q) < 0.5) return std::log1p(q);
  return log_mpz(a) - log_mpz(b);
}

std::size_t bits(const QPoint& p) {
  return std::max({mpz_sizeinbase(p.x.get_num_mpz_t(), 2), mpz_sizeinbase(p.x.get_den_mpz_t(), 2),
                   mpz_sizeinbase(p.y.get_num_mpz_t(), 2), mpz_sizeinbase(p.y.get_den_mpz_t(), 2)});
}

struct OneSided {
  HeightEstimate est;
  bool budget_hit = false;
};

OneSided one_direction(const HenonFamily& f, const mpq_class& t, const QPoint& p0, bool fwd, const HeightOptions& opt) {
  const double d = f.degree();
  OneSided out;
  auto& e = out.est;
  std::vector<QPoint> visited{p0};
  std::vector<mpz_class> maxima{height_max(p0)};
  double max_log = log_mpz(maxima[0]);
  QPoint z = p0;
  double cauchy = 0.0;
  e.estimates.push_back(log_mpz(maxima[0]));
  for (int n = 0; n < opt.n_max; ++n) {
    QPoint next = fwd ? f.apply_exact(t, z) : f.apply_inverse_exact(t, z);
    if (bits(next) > opt.bit_budget) {
      out.budget_hit = true;
      break;
    }
    const mpz_class m = height_max(next);
    const double lm = log_mpz(m);
    // A revisit needs a height already seen; fresh maxima skip the scan.
    if (lm <= max_log && std::find(visited.begin(), visited.end(), next) != visited.end()) {
      e = HeightEstimate{};
      e.periodic = true;
      e.iterations = n + 1;
      e.estimates.assign(1, 0.0);
      return out;
    }
    max_log = std::max(max_log, lm);
    mpz_class mpow;
    mpz_pow_ui(mpow.get_mpz_t(), maxima.back().get_mpz_t(), static_cast<unsigned long>(d));
    const double en = log_ratio(m, mpow);
    cauchy = std::max(cauchy, std::abs(en));
    e.defects.push_back(en);
    e.estimates.push_back(lm / std::pow(d, n + 1));
    visited.push_back(next);
    maxima.push_back(m);
    z = std::move(next);
  }
  e.iterations = static_cast<int>(e.estimates.size()) - 1;
  e.value = std::max(0.0, e.estimates.back());
  e.cauchy_constant = cauchy;
  e.error = cauchy * std::pow(d, -e.iterations) * opt.safety;
  return out;
}

}  // namespace

double naive_height(const QPoint& p) { return log_mpz(height_max(p)) < 0 ? 0.0 : log_mpz(height_max(p)); }

double naive_height(const mpq_class& t) {
  const mpz_class n = abs(t.get_num());
  return log_mpz(n > t.get_den() ? n : mpz_class(t.get_den()));
}

HeightEstimate canonical_height(const HenonFamily& f, const mpq_class& t, const QPoint& p0, HeightSign sign,
                                const HeightOptions& opt) {
  if (opt.n_max < 3) throw PreconditionFailed("n_max must be at least 3");
  f.rational_factors();
  f.check_parameter(cplx(t.get_d()));
  QPoint p = p0;
  p.x.canonicalize();
  p.y.canonicalize();
  auto run = [&](bool fwd) {
    auto r = one_direction(f, t, p, fwd, opt);
    if (!r.est.periodic && r.budget_hit && r.est.iterations < 3) {
      throw BitBudgetExceeded("fewer than three iterates fit in the bit budget");
    }
    return r.est;
  };
  if (sign == HeightSign::Plus) return run(true);
  if (sign == HeightSign::Minus) return run(false);
  HeightEstimate plus = run(true);
  if (plus.periodic) return plus;
  HeightEstimate minus = run(false);
  if (minus.periodic) return minus;
  HeightEstimate both = plus;
  both.value = plus.value + minus.value;
  both.error = plus.error + minus.error;
  both.iterations = std::min(plus.iterations, minus.iterations);
  both.cauchy_constant = std::max(plus.cauchy_constant, minus.cauchy_constant);
  return both;
}

std::vector<double> difference_ratios(const HeightEstimate& e, int degree) {
  std::vector<double> out;
  for (std::size_t n = 0; n + 1 < e.defects.size(); ++n) {
    const double a = std::abs(e.defects[n]);
    const double b = std::abs(e.defects[n + 1]);
    if (a == 0.0 && b == 0.0) {
      out.push_back(std::nan(""));
    } else {
      out.push_back(b / (degree * a));
    }
  }
  return out;
}

InequalityReport inequality_harness(const HenonFamily& f, const std::vector<HeightSample>& samples,
                                    const HeightOptions& opt, int threads) {
  if (samples.empty()) throw PreconditionFailed("harness needs at least one sample");
  std::vector<std::optional<std::pair<double, double>>> slack(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto& s = samples[i];
    try {
      const double hhat = canonical_height(f, s.t, s.p, HeightSign::Both, opt).value;
      const double h = naive_height(s.p);
      const double scale = naive_height(s.t) + 1.0;
      slack[i] = std::make_pair((h - hhat) / scale, (hhat - 2.0 * h) / scale);
    } catch (const BitBudgetExceeded&) {
    } catch (const DegenerateParameter&) {
    }
  });
  InequalityReport r;
  r.c2 = -HUGE_VAL;
  for (const auto& s : slack) {
    if (!s) {
      ++r.skipped;
      continue;
    }
    ++r.used;
    r.slack1.push_back(s->first);
    r.slack2.push_back(s->second);
    r.c1 = std::max(r.c1, s->first);
    r.c2 = std::max(r.c2, s->second);
  }
  if (r.used == 0) throw BitBudgetExceeded("no sample completed within the bit budget");
  return r;
}

nlohmann::json to_json(const InequalityReport& r) {
  auto quantiles = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    nlohmann::json q;
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      q[std::to_string(static_cast<int>(p * 100))] = v[static_cast<std::size_t>(p * (v.size() - 1))];
    }
    return q;
  };
  return {{"c1", r.c1},
          {"c2", r.c2},
          {"used", r.used},
          {"skipped", r.skipped},
          {"slack1_quantiles", quantiles(r.slack1)},
          {"slack2_quantiles", quantiles(r.slack2)}};
}

mpq_class random_rational(std::mt19937_64& rng, int num_max, int den_max) {
  std::uniform_int_distribution<int> num(-num_max, num_max), den(1, den_max);
  const int a = num(rng);
  const int b = den(rng);
  mpq_class q(a, b);
  q.canonicalize();
  return q;
}

std::vector<HeightSample> random_height_samples(int count, int num_max, int den_max, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<HeightSample> out;
  for (int k = 0; k < count; ++k) {
    HeightSample h;
    h.t = random_rational(rng, num_max, den_max);
    h.p.x = random_rational(rng, num_max, den_max);
    h.p.y = random_rational(rng, num_max, den_max);
    out.push_back(std::move(h));
  }
  return out;
}

void write_height_csv(std::ostream& out, const std::vector<HeightSample>& samples,
                      const std::vector<HeightEstimate>& estimates) {
  out << "t,x,y,value,error,iterations,cauchy_constant,periodic\n" << std::setprecision(17);
  for (std::size_t i = 0; i < samples.size() && i < estimates.size(); ++i) {
    const auto& e = estimates[i];
    out << format_rational(samples[i].t) << ',' << format_rational(samples[i].p.x) << ','
        << format_rational(samples[i].p.y) << ',' << e.value << ',' << e.error << ',' << e.iterations << ','
        << e.cauchy_constant << ',' << (e.periodic ? 1 : 0) << '\n';
  }
}

}  // namespace henon
