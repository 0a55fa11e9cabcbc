#pragma once

#include <stdexcept>
#include <string>

namespace treebridge {

// Error taxonomy mapped onto CLI exit codes:
//   ConfigError  -> 2 (bad tree/config/arguments)
//   NumericError -> 3 (non-finite values, failed convergence)
//   IoError      -> 4 (files, parsing)
struct ConfigError : std::runtime_error {
  std::string code;
  ConfigError(std::string c, const std::string& what)
      : std::runtime_error(c + ": " + what), code(std::move(c)) {}
};

struct NumericError : std::runtime_error {
  std::string code;
  NumericError(std::string c, const std::string& what)
      : std::runtime_error(c + ": " + what), code(std::move(c)) {}
};

struct IoError : std::runtime_error {
  std::string code;
  IoError(std::string c, const std::string& what)
      : std::runtime_error(c + ": " + what), code(std::move(c)) {}
};

}  // namespace treebridge
