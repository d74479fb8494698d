#pragma once

#include <stdexcept>
#include <string>

namespace dhia {

// Exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, config = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ExitCode::numeric, what) {}
};

// Shape mismatch between operands or between a network and its input.
struct DimensionError : Error {
  explicit DimensionError(const std::string& what) : Error(ExitCode::data, what) {}
};

// Violated calling contract (programming error on the caller side).
struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error(ExitCode::config, what) {}
};

}  // namespace dhia
