#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace henon::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes.
enum Exit : int { Ok = 0, Failure = 1, BadConfig = 2, Soft = 3 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
};

const std::vector<std::string>& commands();
std::vector<std::string> presets(const std::string& command);
nlohmann::json preset(const std::string& command, const std::string& name);

/// Preset (if any) overlaid by the config file, with threads and seed folded in.
/// Throws ConfigError.
nlohmann::json resolve_config(const std::string& command, const RunOptions& opt);

/// Runs one subcommand, writing outputs and manifest.json under opt.out.
/// Returns an Exit code; messages go to `log`.
int run(const std::string& command, const RunOptions& opt, std::ostream& log);

int main_entry(int argc, char** argv);

}  // namespace henon::cli
