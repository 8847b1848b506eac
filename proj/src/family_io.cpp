#include "henon/family_io.hpp"

#include <fstream>
#include <sstream>

namespace henon {

using nlohmann::json;

mpq_class parse_rational(const std::string& s) {
  mpq_class q;
  if (s.empty() || q.set_str(s, 10) != 0) throw InvalidFamily("malformed rational '" + s + "'");
  if (q.get_den() == 0) throw InvalidFamily("zero denominator in '" + s + "'");
  q.canonicalize();
  return q;
}

std::string format_rational(const mpq_class& q) { return q.get_str(10); }

namespace {

bool is_exact(const json& v) { return v.is_string() || v.is_number_integer(); }

mpq_class exact_value(const json& v) {
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_unsigned()) return mpq_class(std::to_string(v.get<std::uint64_t>()));
  return mpq_class(std::to_string(v.get<std::int64_t>()));
}

bool poly_is_exact(const json& coeffs) {
  if (!coeffs.is_array()) return false;
  for (const auto& c : coeffs)
    if (!is_exact(c)) return false;
  return true;
}

QPoly qpoly_from_json(const json& coeffs) {
  std::vector<mpq_class> c;
  for (const auto& v : coeffs) c.push_back(exact_value(v));
  return QPoly(std::move(c));
}

json qpoly_to_json(const QPoly& p) {
  json arr = json::array();
  for (const auto& q : p.coeffs()) arr.push_back(format_rational(q));
  return arr;
}

}  // namespace

cplx complex_from_json(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_string()) return {parse_rational(v.get<std::string>()).get_d(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  throw InvalidFamily(where + ": expected a number, \"num/den\" string or [re, im] pair");
}

CPoly cpoly_from_json(const json& coeffs, const std::string& where) {
  if (!coeffs.is_array()) throw InvalidFamily(where + ": expected an array of coefficients");
  std::vector<cplx> c;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    c.push_back(complex_from_json(coeffs[i], where + "/" + std::to_string(i)));
  }
  return CPoly(std::move(c));
}

json cpoly_to_json(const CPoly& p) {
  json arr = json::array();
  for (const auto& c : p.coeffs()) arr.push_back({c.real(), c.imag()});
  return arr;
}

HenonFamily family_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("factors") || !doc["factors"].is_array() || doc["factors"].empty()) {
    throw InvalidFamily("/factors: expected a nonempty array");
  }
  bool exact = true;
  for (const auto& fac : doc["factors"]) {
    if (!fac.is_object() || !fac.contains("p") || !fac.contains("delta") || !fac["p"].is_array()) {
      throw InvalidFamily("/factors: each factor needs \"p\" (array) and \"delta\"");
    }
    for (const auto& c : fac["p"]) exact = exact && poly_is_exact(c);
    exact = exact && poly_is_exact(fac["delta"]);
  }
  if (exact) {
    std::vector<RationalFactor> fs;
    for (const auto& fac : doc["factors"]) {
      RationalFactor rf;
      for (const auto& c : fac["p"]) rf.p.push_back(qpoly_from_json(c));
      rf.delta = qpoly_from_json(fac["delta"]);
      fs.push_back(std::move(rf));
    }
    return HenonFamily(std::move(fs));
  }
  std::vector<HenonFactor> fs;
  std::size_t k = 0;
  for (const auto& fac : doc["factors"]) {
    const std::string where = "/factors/" + std::to_string(k++);
    HenonFactor f;
    for (std::size_t i = 0; i < fac["p"].size(); ++i) {
      f.p.push_back(cpoly_from_json(fac["p"][i], where + "/p/" + std::to_string(i)));
    }
    f.delta = cpoly_from_json(fac["delta"], where + "/delta");
    fs.push_back(std::move(f));
  }
  return HenonFamily(std::move(fs));
}

json family_to_json(const HenonFamily& f) {
  json factors = json::array();
  if (f.is_rational()) {
    for (const auto& rf : f.rational_factors()) {
      json p = json::array();
      for (const auto& c : rf.p) p.push_back(qpoly_to_json(c));
      factors.push_back({{"p", p}, {"delta", qpoly_to_json(rf.delta)}});
    }
  } else {
    for (const auto& hf : f.factors()) {
      json p = json::array();
      for (const auto& c : hf.p) p.push_back(cpoly_to_json(c));
      factors.push_back({{"p", p}, {"delta", cpoly_to_json(hf.delta)}});
    }
  }
  return {{"factors", factors}};
}

MarkedPoint marked_point_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("a") || !doc.contains("b")) {
    throw InvalidFamily("marked point needs \"a\" and \"b\" coefficient arrays");
  }
  return {cpoly_from_json(doc["a"], "/a"), cpoly_from_json(doc["b"], "/b")};
}

json marked_point_to_json(const MarkedPoint& s) { return {{"a", cpoly_to_json(s.a)}, {"b", cpoly_to_json(s.b)}}; }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidFamily("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InvalidFamily(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

}  // namespace henon
