#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "henon/family_io.hpp"
#include "henon/green.hpp"
#include "henon/heights.hpp"
#include "henon/periodic.hpp"
#include "henon/quadratic.hpp"
#include "henon/renorm.hpp"

namespace py = pybind11;
using namespace henon;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Sign parse_sign(const std::string& s) {
  if (s == "plus") return Sign::Plus;
  if (s == "minus") return Sign::Minus;
  throw py::value_error("sign must be 'plus' or 'minus'");
}

HeightSign parse_height_sign(const std::string& s) {
  if (s == "plus") return HeightSign::Plus;
  if (s == "minus") return HeightSign::Minus;
  if (s == "both") return HeightSign::Both;
  throw py::value_error("sign must be 'plus', 'minus' or 'both'");
}

Point point(const std::pair<cplx, cplx>& z) { return {z.first, z.second}; }

Rect rect(const std::array<double, 4>& r) { return {r[0], r[1], r[2], r[3]}; }

}  // namespace

PYBIND11_MODULE(_henon, m) {
  m.doc() = "Green functions, periodic points, heights and certificates for Hénon families.";
  m.attr("__version__") = cli::kVersion;

  py::register_exception<HenonError>(m, "HenonError");

  py::class_<HenonFamily>(m, "Family")
      .def_static("quadratic",
                  [](std::vector<cplx> c, std::vector<cplx> delta) {
                    return HenonFamily::quadratic(CPoly(std::move(c)), CPoly(std::move(delta)));
                  },
                  py::arg("c"), py::arg("delta"), "(y, y^2 + c(t) - delta(t) x); coefficient lists in powers of t.")
      .def_static("quadratic_t", py::overload_cast<cplx>(&HenonFamily::quadratic_t), py::arg("delta"))
      .def_static("exact_quadratic_t",
                  [](const std::string& delta) { return HenonFamily::quadratic_t(parse_rational(delta)); },
                  py::arg("delta"))
      .def_static("from_json", [](const std::string& s) { return family_from_json(nlohmann::json::parse(s)); })
      .def("to_json", [](const HenonFamily& f) { return family_to_json(f).dump(); })
      .def_property_readonly("degree", &HenonFamily::degree)
      .def_property_readonly("is_rational", &HenonFamily::is_rational)
      .def("__call__", [](const HenonFamily& f, cplx t, std::pair<cplx, cplx> z) {
        const Point w = evaluate(f, t, point(z));
        return std::make_pair(w.x, w.y);
      })
      .def("inverse", [](const HenonFamily& f, cplx t, std::pair<cplx, cplx> z) {
        const Point w = evaluate_inverse(f, t, point(z));
        return std::make_pair(w.x, w.y);
      });

  py::class_<GreenEnclosure>(m, "GreenEnclosure")
      .def_readonly("lower", &GreenEnclosure::lower)
      .def_readonly("upper", &GreenEnclosure::upper)
      .def_readonly("escaped_at", &GreenEnclosure::escaped_at)
      .def_readonly("iterations_used", &GreenEnclosure::iterations_used)
      .def_property_readonly("mid", &GreenEnclosure::mid)
      .def_property_readonly("width", &GreenEnclosure::width);

  m.def(
      "green",
      [](const HenonFamily& f, cplx t, std::pair<cplx, cplx> z, const std::string& sign, int max_iter, double tol) {
        GreenOptions o;
        o.max_iter = max_iter;
        o.tol = tol;
        return green(f, t, point(z), parse_sign(sign), o);
      },
      py::arg("family"), py::arg("t"), py::arg("z"), py::arg("sign") = "plus", py::arg("max_iter") = 64,
      py::arg("tol") = 1e-9);

  m.def(
      "render_green",
      [](const HenonFamily& f, cplx t, std::array<double, 4> r, int nx, int ny, int threads) {
        GreenRender g;
        {
          py::gil_scoped_release release;
          g = render_green(f, t, PlaneSlice{}, rect(r), nx, ny, {}, threads);
        }
        py::array_t<double> out({ny, nx});
        std::copy(g.grid.values.begin(), g.grid.values.end(), out.mutable_data());
        return out;
      },
      py::arg("family"), py::arg("t"), py::arg("rect"), py::arg("nx"), py::arg("ny"), py::arg("threads") = 1,
      "G+ on the y-plane at x = 0; rows are Im, columns Re.");

  m.def(
      "find_periodic",
      [](const HenonFamily& f, cplx t, int k, std::array<double, 4> box_x, std::array<double, 4> box_y,
         int seeds_per_axis) {
        PeriodicSearch s;
        s.seeds_per_axis = seeds_per_axis;
        py::list out;
        for (const auto& r : find_periodic(f, t, k, {rect(box_x), rect(box_y)}, s)) {
          py::dict d;
          d["z"] = std::make_pair(r.z.x, r.z.y);
          d["period"] = r.period;
          d["u"] = r.multipliers.u;
          d["s"] = r.multipliers.s;
          d["class"] = to_string(r.cls);
          d["residual"] = r.residual;
          out.append(d);
        }
        return out;
      },
      py::arg("family"), py::arg("t"), py::arg("period"), py::arg("box_x"), py::arg("box_y"),
      py::arg("seeds_per_axis") = 6);

  m.def(
      "classify", [](cplx u, cplx s, double eps) { return to_string(classify({u, s}, eps)); }, py::arg("u"),
      py::arg("s"), py::arg("eps") = 1e-8);

  m.def(
      "canonical_height",
      [](const HenonFamily& f, const std::string& t, const std::string& x, const std::string& y,
         const std::string& sign) {
        const auto e =
            canonical_height(f, parse_rational(t), {parse_rational(x), parse_rational(y)}, parse_height_sign(sign));
        py::dict d;
        d["value"] = e.value;
        d["error"] = e.error;
        d["iterations"] = e.iterations;
        d["periodic"] = e.periodic;
        d["estimates"] = e.estimates;
        return d;
      },
      py::arg("family"), py::arg("t"), py::arg("x"), py::arg("y"), py::arg("sign") = "plus");

  m.def("fixed_points", [](cplx delta, cplx t) {
    const auto p = fixed_points(delta, t);
    return std::make_pair(p.plus, p.minus);
  });

  m.def(
      "saddle_experiment", [](int threads) { return to_python(to_json(saddle_experiment(threads))); },
      py::arg("threads") = 1);
  m.def(
      "semi_experiment", [](int threads) { return to_python(to_json(semi_experiment(threads))); },
      py::arg("threads") = 1);

  m.def("commands", &cli::commands);
  m.def("presets", &cli::presets);
  m.def(
      "run",
      [](const std::string& command, const std::string& out, std::optional<std::string> preset,
         std::optional<std::string> config, int threads, std::optional<std::uint64_t> seed) {
        cli::RunOptions o;
        o.out = out;
        o.preset = preset;
        if (config) o.config = *config;
        o.threads = threads;
        o.seed = seed;
        std::ostringstream log;
        const int code = cli::run(command, o, log);
        return std::make_pair(code, log.str());
      },
      py::arg("command"), py::arg("out"), py::arg("preset") = py::none(), py::arg("config") = py::none(),
      py::arg("threads") = 1, py::arg("seed") = py::none(),
      "Runs a CLI subcommand in-process; returns (exit code, log).");
}
