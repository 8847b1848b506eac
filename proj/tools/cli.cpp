#include "cli.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "henon/curves.hpp"
#include "henon/family_io.hpp"
#include "henon/green.hpp"
#include "henon/heights.hpp"
#include "henon/measures.hpp"
#include "henon/periodic.hpp"
#include "henon/quadratic.hpp"
#include "henon/renorm.hpp"

namespace henon::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(p.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  return parts;
}

// Typed access to the resolved config. Errors name the file and line of the
// offending key when it came from the config file, or the preset otherwise.
class Config {
 public:
  Config(json doc, json file_doc, std::string file_name, std::string file_text, fs::path base, std::string preset)
      : doc_(std::move(doc)),
        file_doc_(std::move(file_doc)),
        file_name_(std::move(file_name)),
        text_(std::move(file_text)),
        base_(std::move(base)),
        preset_(std::move(preset)) {}

  const json& doc() const { return doc_; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::string where;
    if (find(file_doc_, key)) {
      where = file_name_;
      if (int line = line_of(key)) where += ":" + std::to_string(line);
    } else if (!preset_.empty()) {
      where = "preset " + preset_;
    } else {
      where = file_name_.empty() ? "config" : file_name_;
    }
    throw ConfigError(where + ": " + key + ": " + what);
  }

  bool has(const std::string& key) const { return find(doc_, key) != nullptr; }

  const json& get(const std::string& key) const {
    const json* v = find(doc_, key);
    if (!v) fail(key, "missing required key");
    return *v;
  }

  double num(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "expected a finite number");
    return x;
  }
  double positive(const std::string& key) const {
    const double x = num(key);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }
  double num_or(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }

  int integer(const std::string& key, int lo, int hi) const {
    const json& v = get(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    const auto x = v.get<long long>();
    if (x < lo || x > hi) fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(x);
  }
  int integer_or(const std::string& key, int lo, int hi, int fallback) const {
    return has(key) ? integer(key, lo, hi) : fallback;
  }

  bool flag_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string choice(const std::string& key, const std::set<std::string>& allowed) const {
    const json& v = get(key);
    std::string all;
    for (const auto& a : allowed) all += (all.empty() ? "" : ", ") + a;
    if (!v.is_string() || !allowed.count(v.get<std::string>())) fail(key, "expected one of: " + all);
    return v.get<std::string>();
  }

  cplx complex(const std::string& key) const {
    try {
      return complex_from_json(get(key), key);
    } catch (const HenonError& e) {
      fail(key, "expected a number, \"num/den\" string or [re, im] pair");
    }
  }

  std::vector<cplx> complex_list(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array");
    std::vector<cplx> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      try {
        out.push_back(complex_from_json(v[i], key));
      } catch (const HenonError&) {
        fail(key, "entry " + std::to_string(i) + " is not a complex number");
      }
    }
    return out;
  }

  std::vector<int> int_list(const std::string& key, int lo, int hi) const {
    const json& v = get(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < lo || e.get<long long>() > hi) {
        fail(key, "entries must be integers in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      }
      out.push_back(e.get<int>());
    }
    return out;
  }

  mpq_class rational(const std::string& key) const {
    const json& v = get(key);
    try {
      if (v.is_number_integer()) return mpq_class(v.get<long>());
      if (v.is_string()) return parse_rational(v.get<std::string>());
    } catch (const std::exception&) {
    }
    fail(key, "expected an integer or \"num/den\" string");
  }

  Rect rect(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_array() || v.size() != 4 || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
      fail(key, "expected [re_min, re_max, im_min, im_max]");
    }
    Rect r{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
    if (!(r.width() > 0.0 && r.height() > 0.0)) fail(key, "rectangle must have positive area");
    return r;
  }

  Point point(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_array() || v.size() != 2) fail(key, "expected [x, y]");
    try {
      return {complex_from_json(v[0], key), complex_from_json(v[1], key)};
    } catch (const HenonError&) {
      fail(key, "coordinates must be numbers, \"num/den\" strings or [re, im] pairs");
    }
  }

  QPoint rational_point(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_array() || v.size() != 2) fail(key, "expected [x, y] as rationals");
    try {
      auto q = [](const json& e) { return e.is_number_integer() ? mpq_class(e.get<long>()) : parse_rational(e.get<std::string>()); };
      return {q(v[0]), q(v[1])};
    } catch (const std::exception&) {
      fail(key, "coordinates must be integers or \"num/den\" strings");
    }
  }

  // Inline document or a path relative to the config file.
  json document(const std::string& key) const {
    const json& v = get(key);
    if (v.is_string()) {
      try {
        return read_json_file(base_ / v.get<std::string>());
      } catch (const std::exception& e) {
        fail(key, e.what());
      }
    }
    return v;
  }

  HenonFamily family(const std::string& key = "family") const {
    try {
      return family_from_json(document(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }

  MarkedPoint marked(const std::string& key) const {
    try {
      return marked_point_from_json(document(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }

  CurveFamily curve(const std::string& key) const {
    try {
      return curve_from_json(document(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }

 private:
  static const json* find(const json& doc, const std::string& key) {
    const json* cur = &doc;
    for (const auto& part : split_key(key)) {
      if (!cur->is_object() || !cur->contains(part)) return nullptr;
      cur = &(*cur)[part];
    }
    return cur;
  }

  // Line of the last path component, searched after each enclosing key.
  int line_of(const std::string& key) const {
    std::size_t pos = 0;
    for (const auto& part : split_key(key)) {
      const std::string quoted = "\"" + part + "\"";
      std::size_t hit = pos;
      for (;;) {
        hit = text_.find(quoted, hit);
        if (hit == std::string::npos) return 0;
        std::size_t k = hit + quoted.size();
        while (k < text_.size() && std::isspace(static_cast<unsigned char>(text_[k]))) ++k;
        if (k < text_.size() && text_[k] == ':') break;
        hit += quoted.size();
      }
      pos = hit;
    }
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  json doc_;
  json file_doc_;
  std::string file_name_;
  std::string text_;
  fs::path base_;
  std::string preset_;
};

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

struct Context {
  fs::path out;
  int threads = 1;
  std::uint64_t seed = 1;
  std::ostream* log = nullptr;
  std::vector<std::string> outputs;
  json summary = json::object();

  fs::path file(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }
  void write_json(const std::string& name, const json& j) {
    std::ofstream o(file(name));
    o << j.dump(1) << "\n";
  }
};

using Handler = std::function<int(const Config&, Context&)>;

struct Command {
  std::vector<std::string> keys;
  std::map<std::string, json> presets;
  Handler run;
};

// ---------------------------------------------------------------- presets

json quadratic_doc(double delta) {
  return family_to_json(HenonFamily::quadratic(CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(cplx(delta))));
}
json exact_quadratic_doc(const mpq_class& delta) { return family_to_json(HenonFamily::quadratic_t(delta)); }
json reversible_doc() { return quadratic_doc(-1.0); }
json origin_doc() { return marked_point_to_json(MarkedPoint{CPoly(), CPoly()}); }
json anti_diagonal_doc() {
  return curve_to_json(CurveFamily::line(1.0, 0.0, -1.0, 0.0, Rect{-4.0, 4.0, -4.0, 4.0}));
}

json saddle_preset() {
  const double y = (1.3 + std::sqrt(1.69 + 8.0)) / 2.0;
  return {{"family", family_to_json(HenonFamily::quadratic(CPoly(std::vector<cplx>{0.0, 1.0}), CPoly(cplx(0.3))))},
          {"t0", -2.0},
          {"z0", json::array({y, y})},
          {"p", 3},
          {"disk_radius", 1e-2},
          {"rings", 4},
          {"per_ring", 16},
          {"n_max", 20}};
}

json semi_preset() {
  return {{"family", family_to_json(HenonFamily::quadratic(CPoly(cplx(-0.75)), CPoly(std::vector<cplx>{0.0, 1.0})))},
          {"t0", -2.0},
          {"z0", json::array({0.5, 0.5})},
          {"lambda", 2.0},
          {"p", 3},
          {"disk_radius", 1e-2},
          {"rings", 4},
          {"per_ring", 16},
          {"n_max", 16}};
}

// ---------------------------------------------------------------- handlers

GreenOptions green_options(const Config& c) {
  GreenOptions g;
  g.max_iter = c.integer_or("max_iter", 1, 100000, g.max_iter);
  g.tol = c.num_or("tol", g.tol);
  if (!(g.tol > 0.0)) c.fail("tol", "must be positive");
  g.quad_orbit = c.flag_or("quad_orbit", g.quad_orbit);
  return g;
}

MeasureOptions measure_options(const Config& c, int threads) {
  MeasureOptions m;
  m.green = green_options(c);
  m.threads = threads;
  m.width_factor = c.num_or("width_factor", m.width_factor);
  return m;
}

int grid_size(const Config& c, const std::string& key) { return c.integer(key, 3, 1 << 14); }

int green_render(const Config& c, Context& ctx) {
  const auto f = c.family();
  PlaneSlice slice;
  if (c.has("slice.origin")) slice.origin = c.point("slice.origin");
  if (c.has("slice.dir_u")) slice.dir_u = c.point("slice.dir_u");
  if (c.has("slice.dir_v")) slice.dir_v = c.point("slice.dir_v");
  const cplx t = c.complex("t");
  const Rect rect = c.rect("rect");
  const int nx = grid_size(c, "nx"), ny = grid_size(c, "ny");
  const auto opt = green_options(c);
  const auto r = render_green(f, t, slice, rect, nx, ny, opt, ctx.threads);
  write_pgm16(r, ctx.file("green.pgm"), ctx.file("green.json"));
  ctx.summary["max_width"] = r.max_width;
  return Ok;
}

int periodic_scan(const Config& c, Context& ctx) {
  const auto f = c.family();
  PeriodicSearch s;
  s.seeds_per_axis = c.integer_or("seeds_per_axis", 1, 1000, s.seeds_per_axis);
  s.tol = c.num_or("tol", s.tol);
  s.classify_eps = c.num_or("classify_eps", s.classify_eps);
  s.threads = ctx.threads;
  const cplx t = c.complex("t");
  const int period = c.integer("period", 1, 64);
  const SearchBox box{c.rect("box_x"), c.rect("box_y")};
  const auto recs = find_periodic(f, t, period, box, s);
  std::ofstream out(ctx.file("periodic.csv"));
  write_periodic_csv(out, recs);
  json by_class = json::object();
  for (const auto& r : recs) by_class[to_string(r.cls)] = by_class.value(to_string(r.cls), 0) + 1;
  ctx.summary["orbits"] = recs.size();
  ctx.summary["by_class"] = by_class;
  return Ok;
}

int param_measure(const Config& c, Context& ctx) {
  const auto f = c.family();
  const Sign sign = c.choice("sign", {"plus", "minus"}) == "plus" ? Sign::Plus : Sign::Minus;
  const MarkedPoint s = c.marked("marked_point");
  const Rect rect = c.rect("rect");
  const int nx = grid_size(c, "nx"), ny = grid_size(c, "ny");
  const auto opt = measure_options(c, ctx.threads);
  const auto m = measure_grid(f, s, sign, rect, nx, ny, opt);
  write_gmz(ctx.file("measure.gmz"), m);
  ctx.summary["total"] = m.total;
  ctx.summary["negative_mass"] = m.negative_mass;
  return Ok;
}

int proportionality(const Config& c, Context& ctx) {
  const auto f = c.family();
  const MarkedPoint s = c.marked("marked_point");
  const Rect rect = c.rect("rect");
  const int nx = grid_size(c, "nx"), ny = grid_size(c, "ny");
  const auto opt = measure_options(c, ctx.threads);
  const double mass_tol = c.num_or("mass_tol", 1e-8);
  double wp = 0.0, wm = 0.0;
  const auto gp = marked_green_grid(f, MarkedFn(s), Sign::Plus, rect, nx, ny, opt, &wp);
  const auto gm = marked_green_grid(f, MarkedFn(s), Sign::Minus, rect, nx, ny, opt, &wm);
  const double stencil = opt.width_factor * gp.hx() * gp.hy();
  if (std::max(wp, wm) > stencil) {
    throw ResolutionTooCoarse("enclosure width " + std::to_string(std::max(wp, wm)) + " exceeds the stencil scale " +
                              std::to_string(stencil));
  }
  const auto mp = laplacian_measure(gp), mm = laplacian_measure(gm);
  const auto rep = proportionality_test(mp, mm, gp, gm, mass_tol);
  write_gmz(ctx.file("mu_plus.gmz"), mp);
  write_gmz(ctx.file("mu_minus.gmz"), mm);
  ctx.summary = {{"gamma", rep.gamma},
                 {"residual", rep.residual},
                 {"harmonic_defect", rep.harmonic_defect},
                 {"mass_plus", mp.total},
                 {"mass_minus", mm.total},
                 {"max_width", std::max(wp, wm)}};
  ctx.write_json("proportionality.json", ctx.summary);
  return Ok;
}

HeightOptions height_options(const Config& c) {
  HeightOptions h;
  h.n_max = c.integer_or("n_max", 3, 100000, h.n_max);
  if (c.has("bit_budget")) h.bit_budget = static_cast<std::size_t>(c.integer("bit_budget", 64, 1 << 30));
  return h;
}

int height(const Config& c, Context& ctx) {
  const auto f = c.family();
  const auto sc = c.choice("sign", {"plus", "minus", "both"});
  const HeightSign sign = sc == "plus" ? HeightSign::Plus : sc == "minus" ? HeightSign::Minus : HeightSign::Both;
  const mpq_class t = c.rational("t");
  const QPoint point = c.rational_point("point");
  const auto opt = height_options(c);
  const auto e = canonical_height(f, t, point, sign, opt);
  ctx.summary = {{"value", e.value},       {"error", e.error},         {"iterations", e.iterations},
                 {"periodic", e.periodic}, {"estimates", e.estimates}, {"cauchy_constant", e.cauchy_constant}};
  ctx.write_json("height.json", ctx.summary);
  return Ok;
}

int height_harness(const Config& c, Context& ctx) {
  const auto f = c.family();
  const int count = c.integer("count", 1, 1000000);
  const int num_max = c.integer("num_max", 1, 1 << 20);
  const int den_max = c.integer("den_max", 1, 1 << 20);
  const auto opt = height_options(c);
  const auto samples = random_height_samples(count, num_max, den_max, ctx.seed);
  const auto rep = inequality_harness(f, samples, opt, ctx.threads);
  json doc = to_json(rep);
  json js = json::array();
  for (const auto& s : samples) js.push_back({format_rational(s.t), format_rational(s.p.x), format_rational(s.p.y)});
  doc["samples"] = js;
  ctx.write_json("harness.json", doc);
  ctx.summary = {{"c1", rep.c1}, {"c2", rep.c2}, {"used", rep.used}, {"skipped", rep.skipped}};
  return Ok;
}

CurveOptions curve_options(const Config& c, int threads) {
  CurveOptions o;
  o.green = green_options(c);
  o.threads = threads;
  return o;
}

int curve_energy(const Config& c, Context& ctx) {
  const auto f = c.family();
  const auto curve = c.curve("curve");
  const int w_res = c.integer("w_res", 4, 1 << 14);
  const bool symmetry = c.flag_or("symmetry", false);
  const auto opt = curve_options(c, ctx.threads);
  json rows = json::array();
  for (cplx t : c.complex_list("t")) {
    const auto e = fiber_energy(f, curve, t, w_res, opt);
    json row = {{"t", cjson(t)}, {"energy", e.value}, {"boundary_flag", e.boundary_flag}, {"max_width", e.max_width}};
    if (symmetry) row["symmetry_defect"] = symmetry_defect(f, curve, t, w_res, opt);
    rows.push_back(row);
  }
  ctx.summary["fibers"] = rows;
  ctx.write_json("energy.json", rows);
  return Ok;
}

int curve_height(const Config& c, Context& ctx) {
  const auto f = c.family();
  const auto curve = c.curve("curve");
  const Rect t_rect = c.rect("t_rect");
  const int t_res = c.integer("t_res", 3, 4096);
  const int w_res = c.integer("w_res", 4, 1 << 14);
  const auto opt = curve_options(c, ctx.threads);
  const auto p = energy_profile(f, curve, t_rect, t_res, w_res, opt);
  std::ofstream out(ctx.file("profile.csv"));
  write_profile_csv(out, p);
  ctx.summary["family_height"] = profile_mass(p.values);
  return Ok;
}

int sigma_distance(const Config& c, Context& ctx) {
  const auto curve = c.curve("curve");
  const cplx delta = c.complex("delta");
  const auto ts = c.complex_list("t");
  const double r = c.positive("r");
  const int w_res = c.integer_or("w_res", 4, 4096, 48);
  const auto rep = sigma_distance_check(curve, delta, ts, r, w_res);
  ctx.summary = {{"pass", rep.pass}, {"vacuous", rep.vacuous}, {"r", rep.r}, {"distances", rep.distances}};
  ctx.write_json("sigma.json", ctx.summary);
  return Ok;
}

CertifyOptions certify_options(const Config& c, int threads) {
  CertifyOptions o;
  o.threads = threads;
  o.extra_levels = c.integer_or("extra_levels", 0, 20, o.extra_levels);
  if (c.has("max_cells")) o.max_cells = static_cast<std::size_t>(c.positive("max_cells"));
  return o;
}

int certify_julia(const Config& c, Context& ctx) {
  const cplx delta = c.complex("delta");
  const cplx t = c.complex("t");
  std::vector<Point> centers;
  if (c.has("centers")) {
    const json& v = c.get("centers");
    if (!v.is_array() || v.empty()) c.fail("centers", "expected a non-empty array of [x, y] points");
    for (std::size_t i = 0; i < v.size(); ++i) centers.push_back(c.point("centers." + std::to_string(i)));
  } else {
    const auto a = julia_bidisk_centers(delta, t);
    centers.assign(a.begin(), a.end());
  }
  const double radius = c.positive("radius");
  const double cell = c.positive("cell_size");
  const int iterations = c.integer("iterations", 1, 10000);
  const auto opt = certify_options(c, ctx.threads);
  const double fraction = c.num_or("replay_fraction", 0.01);
  if (!(fraction >= 0.0 && fraction <= 1.0)) c.fail("replay_fraction", "must lie in [0, 1]");
  const auto cert = certify_containment(delta, t, centers, radius, cell, iterations, opt);
  const auto rep = replay_certificate(cert, fraction, ctx.seed);
  json doc = to_json(cert);
  doc["replay"] = {{"ok", rep.ok},
                   {"digest_ok", rep.digest_ok},
                   {"coverage_ok", rep.coverage_ok},
                   {"sampled", rep.sampled},
                   {"mismatches", rep.mismatches}};
  ctx.write_json("certificate.json", doc);
  ctx.summary = {{"verdict", doc["verdict"]}, {"replay_ok", rep.ok}, {"digest", cert.digest}};
  if (!rep.ok) throw HenonError("certificate replay failed");
  return cert.certified ? Ok : Soft;
}

int estimate_rt_cmd(const Config& c, Context& ctx) {
  const cplx delta = c.complex("delta");
  const cplx t = c.complex("t");
  const double cell = c.positive("cell_size");
  const double r_max = c.num_or("r_max", 2.0);
  const int halvings = c.integer_or("max_halvings", 0, 60, 12);
  const int iterations = c.integer_or("iterations", 1, 10000, 30);
  const auto opt = certify_options(c, ctx.threads);
  const auto e = estimate_rt(delta, t, cell, r_max, halvings, iterations, opt);
  json sweep = json::array();
  for (const auto& [r, ok] : e.sweep) sweep.push_back({{"radius", r}, {"certified", ok}});
  ctx.summary = {{"r", e.r}, {"sweep", sweep}, {"digest", e.certificate.digest}};
  ctx.write_json("rt.json", ctx.summary);
  return Ok;
}

RenormOptions renorm_options(const Config& c, int threads) {
  RenormOptions o;
  o.threads = threads;
  o.n_min = c.integer_or("n_min", 0, 1000, o.n_min);
  o.base_iter = c.integer_or("base_iter", 1, 100000, o.base_iter);
  o.green_tol = c.num_or("green_tol", o.green_tol);
  o.width_tol = c.num_or("width_tol", o.width_tol);
  o.series_order = c.integer_or("series_order", 1, 200, o.series_order);
  return o;
}

void write_renorm(Context& ctx, const HenonFamily& f, const LocalSaddleData& local, const RenormReport& r,
                  int series_order) {
  ctx.write_json("renorm.json", to_json(r));
  std::ofstream out(ctx.file("series.csv"));
  write_series_csv(out, unstable_parametrization(f, local.t0, local.sigma0, series_order));
  ctx.summary = {{"fitted_ratio", r.fitted_ratio}, {"n_max", r.n_max}, {"nonconstancy", r.nonconstancy}};
  if (!r.backward_sup.empty()) ctx.summary["backward_sup_last"] = r.backward_sup.back();
  if (r.truncated_at) ctx.summary["truncated_at"] = *r.truncated_at;
}

int renorm_common(const Config& c, Context& ctx, bool semi) {
  const auto f = c.family();
  const int p = c.integer("p", 1, 16);
  const cplx t0 = c.complex("t0");
  const Point z0 = c.point("z0");
  const double radius = c.positive("disk_radius");
  const int rings = c.integer("rings", 0, 1000);
  const int per_ring = c.integer("per_ring", 1, 100000);
  const int n_max = c.integer("n_max", 1, 1000);
  const cplx lambda = semi ? c.complex("lambda") : cplx(0.0);
  const auto opt = renorm_options(c, ctx.threads);
  const LocalSaddleData local = local_fixed_point_data(f, t0, z0, 1, p);
  const auto samples = disk_samples(radius, rings, per_ring);
  const auto sigma = adapted_marked_point(f, local, p);
  const RenormReport r = semi ? semi_repelling_sequence(f, sigma, local, lambda, radius, n_max, samples, opt)
                              : renorm_sequence(f, sigma, local, radius, n_max, samples, opt);
  write_renorm(ctx, f, local, r, opt.series_order);
  return Ok;
}

int renorm_saddle(const Config& c, Context& ctx) { return renorm_common(c, ctx, false); }
int renorm_semi(const Config& c, Context& ctx) { return renorm_common(c, ctx, true); }

int equi_report(const Config& c, Context& ctx) {
  const auto f = c.family();
  const MarkedPoint s = c.marked("marked_point");
  const Rect rect = c.rect("rect");
  ParamSearch ps;
  ps.seeds_per_axis = c.integer_or("seeds_per_axis", 1, 1000, ps.seeds_per_axis);
  ps.threads = ctx.threads;
  const auto half_periods = c.int_list("half_periods", 1, 64);
  const int nx = grid_size(c, "nx"), ny = grid_size(c, "ny");
  const int boxes = c.integer_or("boxes", 1, 1024, 8);
  const auto mopt = measure_options(c, ctx.threads);
  std::map<int, std::vector<cplx>> groups;
  json params = json::object();
  for (int n : half_periods) {
    groups[n] = symmetric_periodic_params(f, s, n, rect, ps);
    json roots = json::array();
    for (cplx t : groups[n]) roots.push_back(cjson(t));
    params[std::to_string(n)] = roots;
  }
  const auto mu = measure_grid(f, s, Sign::Plus, rect, nx, ny, mopt);
  const auto rows = equidistribution_report(groups, mu, boxes);
  std::ofstream out(ctx.file("equi.csv"));
  write_equi_csv(out, rows);
  ctx.write_json("params.json", params);
  json table = json::array();
  for (const auto& r : rows) table.push_back({{"half_period", r.key}, {"count", r.count}, {"tv", r.tv}});
  ctx.summary = {{"mass", mu.total}, {"table", table}};
  return Ok;
}

// ---------------------------------------------------------------- table

const std::map<std::string, Command>& table() {
  static const std::map<std::string, Command> t = [] {
    std::map<std::string, Command> m;
    const std::vector<std::string> green_keys = {"max_iter", "tol", "quad_orbit"};
    auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
      a.insert(a.end(), b.begin(), b.end());
      return a;
    };
    const json rev = reversible_doc();
    const json origin = origin_doc();

    m["green-render"] = {with({"family", "t", "rect", "nx", "ny", "slice"}, green_keys),
                         {{"quadratic-basic",
                           {{"family", quadratic_doc(0.5)}, {"t", 0.0}, {"rect", {-3.0, 3.0, -3.0, 3.0}},
                            {"nx", 1024}, {"ny", 1024}, {"max_iter", 64}, {"tol", 1e-9}}}},
                         green_render};
    m["periodic-scan"] = {{"family", "t", "period", "box_x", "box_y", "seeds_per_axis", "tol", "classify_eps"},
                          {{"quadratic-basic",
                            {{"family", quadratic_doc(0.5)}, {"t", 0.0}, {"period", 3},
                             {"box_x", {-3.0, 3.0, -3.0, 3.0}}, {"box_y", {-3.0, 3.0, -3.0, 3.0}},
                             {"seeds_per_axis", 6}}}},
                          periodic_scan};
    const json measure_base = {{"family", rev}, {"marked_point", origin}, {"rect", {-3.0, 3.0, -3.0, 3.0}},
                               {"nx", 256}, {"ny", 256}};
    json pm = measure_base;
    pm["sign"] = "plus";
    m["param-measure"] = {with({"family", "marked_point", "sign", "rect", "nx", "ny", "width_factor"}, green_keys),
                          {{"reversible", pm}},
                          param_measure};
    m["proportionality"] = {
        with({"family", "marked_point", "rect", "nx", "ny", "width_factor", "mass_tol"}, green_keys),
        {{"reversible", measure_base}},
        proportionality};
    m["height"] = {{"family", "t", "point", "sign", "n_max", "bit_budget"},
                   {{"fixed-point",
                     {{"family", exact_quadratic_doc(mpq_class(1, 2))}, {"t", "0"}, {"point", {"3/2", "3/2"}},
                      {"sign", "both"}}}},
                   height};
    m["height-harness"] = {{"family", "count", "num_max", "den_max", "n_max", "bit_budget"},
                           {{"height-inequality",
                             {{"family", exact_quadratic_doc(mpq_class(1, 2))}, {"count", 200}, {"num_max", 5},
                              {"den_max", 5}, {"seed", 11}}}},
                           height_harness};
    m["curve-energy"] = {with({"family", "curve", "t", "w_res", "symmetry"}, green_keys),
                         {{"degenerate-curve",
                           {{"family", rev}, {"curve", anti_diagonal_doc()},
                            {"t", {0.0, 1.0, json::array({0.0, 1.0})}}, {"w_res", 256}, {"symmetry", true}}}},
                         curve_energy};
    m["curve-height"] = {with({"family", "curve", "t_rect", "t_res", "w_res"}, green_keys),
                         {{"degenerate-curve",
                           {{"family", rev}, {"curve", anti_diagonal_doc()}, {"t_rect", {-2.0, 2.0, -2.0, 2.0}},
                            {"t_res", 16}, {"w_res", 96}}}},
                         curve_height};
    m["sigma-distance"] = {{"curve", "delta", "t", "r", "w_res"},
                           {{"offset-line",
                             {{"curve", curve_to_json(CurveFamily::line(1.0, 0.0, 1.0, 5.0, {-60.0, 60.0, -60.0, 60.0}))},
                              {"delta", 0.3}, {"t", {100.0, 1000.0}}, {"r", 3.0}, {"w_res", 48}}}},
                           sigma_distance};
    m["certify-julia"] = {{"delta", "t", "centers", "radius", "cell_size", "iterations", "replay_fraction",
                           "extra_levels", "max_cells"},
                          {{"julia-quadratic",
                            {{"delta", 0.3}, {"t", 200.0}, {"radius", 2.0}, {"cell_size", 0.05}, {"iterations", 30},
                             {"replay_fraction", 0.01}}}},
                          certify_julia};
    m["estimate-rt"] = {{"delta", "t", "cell_size", "r_max", "max_halvings", "iterations", "extra_levels", "max_cells"},
                        {{"degeneration",
                          {{"delta", 0.3}, {"t", 100.0}, {"cell_size", 0.05}, {"r_max", 2.0}, {"max_halvings", 12},
                           {"iterations", 30}}}},
                        estimate_rt_cmd};
    const std::vector<std::string> renorm_keys = {"family",  "t0",       "z0",        "p",         "disk_radius",
                                                  "rings",   "per_ring", "n_max",     "n_min",     "base_iter",
                                                  "green_tol", "width_tol", "series_order"};
    m["renorm-saddle"] = {renorm_keys, {{"saddle", saddle_preset()}}, renorm_saddle};
    m["renorm-semi"] = {with(renorm_keys, {"lambda"}), {{"semi-repelling", semi_preset()}}, renorm_semi};
    json eq = measure_base;
    eq["half_periods"] = {2, 3, 4, 5, 6, 7, 8};
    eq["boxes"] = 8;
    eq["seeds_per_axis"] = 256;
    m["equi-report"] = {
        with({"family", "marked_point", "rect", "nx", "ny", "half_periods", "boxes", "seeds_per_axis", "width_factor"},
             green_keys),
        {{"reversible", eq}},
        equi_report};
    return m;
  }();
  return t;
}

const Command& lookup(const std::string& name) {
  auto it = table().find(name);
  if (it == table().end()) throw ConfigError("unknown command: " + name);
  return it->second;
}

struct Loaded {
  json resolved;
  json file_doc = json::object();
  std::string file_name;
  std::string text;
  fs::path base = ".";
  std::string preset;
};

Loaded load(const std::string& command, const RunOptions& opt) {
  const Command& cmd = lookup(command);
  Loaded l;
  l.resolved = json::object();
  if (opt.preset) {
    auto it = cmd.presets.find(*opt.preset);
    if (it == cmd.presets.end()) {
      std::string names;
      for (const auto& [k, v] : cmd.presets) names += (names.empty() ? "" : ", ") + k;
      throw ConfigError("unknown preset '" + *opt.preset + "' for " + command + " (available: " + names + ")");
    }
    l.resolved = it->second;
    l.preset = *opt.preset;
  }
  if (opt.config) {
    l.file_name = opt.config->string();
    l.text = read_text(*opt.config);
    l.base = opt.config->parent_path();
    try {
      l.file_doc = json::parse(l.text);
    } catch (const json::parse_error& e) {
      const auto upto = std::min<std::size_t>(e.byte, l.text.size());
      const int line = 1 + static_cast<int>(std::count(l.text.begin(), l.text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
      throw ConfigError(l.file_name + ":" + std::to_string(line) + ": invalid JSON");
    }
    if (!l.file_doc.is_object()) throw ConfigError(l.file_name + ":1: config must be a JSON object");
    for (const auto& [k, v] : l.file_doc.items()) l.resolved[k] = v;
  }
  if (!opt.preset && !opt.config) throw ConfigError(command + ": give --config or --preset");
  std::set<std::string> allowed(cmd.keys.begin(), cmd.keys.end());
  allowed.insert({"seed", "threads"});
  for (const auto& [k, v] : l.resolved.items()) {
    if (!allowed.count(k)) {
      Config c(l.resolved, l.file_doc, l.file_name, l.text, l.base, l.preset);
      c.fail(k, "unknown key for " + command);
    }
  }
  Config c(l.resolved, l.file_doc, l.file_name, l.text, l.base, l.preset);
  if (l.resolved.contains("seed") && !(l.resolved["seed"].is_number_unsigned() || l.resolved["seed"].is_number_integer())) {
    c.fail("seed", "expected a non-negative integer");
  }
  if (opt.seed) l.resolved["seed"] = *opt.seed;
  if (!l.resolved.contains("seed")) l.resolved["seed"] = 1;
  if (l.resolved["seed"].get<long long>() < 0) c.fail("seed", "expected a non-negative integer");
  if (l.resolved.contains("threads")) c.integer("threads", 1, 1024);
  l.resolved["threads"] = opt.threads;
  return l;
}

bool soft_failure(const std::exception& e) {
  return dynamic_cast<const DegenerateFit*>(&e) || dynamic_cast<const SweepExhausted*>(&e) ||
         dynamic_cast<const AmplifiedNoise*>(&e) || dynamic_cast<const ResolutionTooCoarse*>(&e);
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : table()) n.push_back(k);
    return n;
  }();
  return names;
}

std::vector<std::string> presets(const std::string& command) {
  std::vector<std::string> n;
  for (const auto& [k, v] : lookup(command).presets) n.push_back(k);
  return n;
}

nlohmann::json preset(const std::string& command, const std::string& name) {
  const auto& p = lookup(command).presets;
  auto it = p.find(name);
  if (it == p.end()) throw ConfigError("unknown preset '" + name + "' for " + command);
  return it->second;
}

nlohmann::json resolve_config(const std::string& command, const RunOptions& opt) { return load(command, opt).resolved; }

int run(const std::string& command, const RunOptions& opt, std::ostream& log) {
  Loaded l;
  try {
    if (opt.threads < 1) throw ConfigError("--threads must be at least 1");
    l = load(command, opt);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return BadConfig;
  }
  Context ctx;
  ctx.out = opt.out;
  ctx.threads = opt.threads;
  ctx.seed = l.resolved["seed"].get<std::uint64_t>();
  ctx.log = &log;
  int code = Ok;
  std::string status = "ok", message;
  try {
    fs::create_directories(ctx.out);
    const Config c(l.resolved, l.file_doc, l.file_name, l.text, l.base, l.preset);
    code = lookup(command).run(c, ctx);
    if (code == Soft) status = "inconclusive";
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return BadConfig;
  } catch (const std::exception& e) {
    code = soft_failure(e) ? Soft : Failure;
    status = code == Soft ? "soft-failure" : "error";
    message = e.what();
    log << command << ": " << message << "\n";
  }
  json outputs = json::object();
  for (const auto& name : ctx.outputs) {
    if (fs::exists(ctx.out / name)) outputs[name] = sha256_file(ctx.out / name);
  }
  json manifest = {{"tool", "henon"},
                   {"version", kVersion},
                   {"command", command},
                   {"preset", l.preset.empty() ? json(nullptr) : json(l.preset)},
                   {"config", l.resolved},
                   {"seed", ctx.seed},
                   {"threads", ctx.threads},
                   {"status", status},
                   {"summary", ctx.summary},
                   {"outputs", outputs}};
  if (!message.empty()) manifest["message"] = message;
  try {
    std::ofstream(ctx.out / "manifest.json") << manifest.dump(1) << "\n";
  } catch (const std::exception& e) {
    log << "cannot write manifest: " << e.what() << "\n";
    return Failure;
  }
  if (code != Failure) log << ctx.summary.dump() << "\n";
  return code;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Hénon family toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(0, 1);
  RunOptions opt;
  std::string config, out = ".";
  std::uint64_t seed = 0;
  std::string preset_name;
  bool list = false;
  app.add_flag("--list-presets", list, "List presets for every command");
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : commands()) {
    auto* s = app.add_subcommand(name);
    s->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    s->add_option("--out", out, "Output directory");
    s->add_option("--threads", opt.threads, "Worker threads")->check(CLI::Range(1, 1024));
    s->add_option("--seed", seed, "RNG seed");
    s->add_option("--preset", preset_name, "Named preset");
    subs[name] = s;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? Ok : BadConfig;
  }
  if (list) {
    for (const auto& name : commands()) {
      std::cout << name << ":";
      for (const auto& p : presets(name)) std::cout << " " << p;
      std::cout << "\n";
    }
    return Ok;
  }
  for (const auto& [name, s] : subs) {
    if (!s->parsed()) continue;
    if (!config.empty()) opt.config = config;
    if (!preset_name.empty()) opt.preset = preset_name;
    if (s->count("--seed")) opt.seed = seed;
    opt.out = out;
    return run(name, opt, std::cerr);
  }
  std::cerr << app.help();
  return BadConfig;
}

}  // namespace henon::cli
