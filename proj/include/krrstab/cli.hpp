#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace krrstab::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kIoError = 2, kDiagnosticsError = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  std::string_view key;
  std::string_view constraint;
};

/// Every accepted config key of `command` with its constraint; empty for an unknown command.
const std::vector<ConfigKey>& config_keys(std::string_view command);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

/// Validates `config`, runs `command` and writes its outputs atomically.
/// Returns the written paths. Throws ConfigError, IoError, or the library's diagnostics errors.
std::vector<std::filesystem::path> execute(std::string_view command, nlohmann::json config, const Overrides& overrides);

/// Full command line (without the program name). Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace krrstab::cli
