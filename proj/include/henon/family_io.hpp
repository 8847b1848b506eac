#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "henon/family.hpp"

namespace henon {

// Family documents:
//   { "factors": [ { "p": [[c0 coeffs in t], [c1 coeffs], ...], "delta": [coeffs in t] } ] }
// A coefficient is "num/den" (exact), a JSON integer (exact), a JSON float (real),
// or [re, im] (complex). A family is exact when every coefficient is exact.

HenonFamily family_from_json(const nlohmann::json& doc);
nlohmann::json family_to_json(const HenonFamily& f);

MarkedPoint marked_point_from_json(const nlohmann::json& doc);
nlohmann::json marked_point_to_json(const MarkedPoint& s);

CPoly cpoly_from_json(const nlohmann::json& coeffs, const std::string& where);
nlohmann::json cpoly_to_json(const CPoly& p);
cplx complex_from_json(const nlohmann::json& v, const std::string& where);

mpq_class parse_rational(const std::string& s);
std::string format_rational(const mpq_class& q);

/// Parses a JSON file; syntax errors are reported with line and column.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace henon
