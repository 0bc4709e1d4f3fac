#pragma once

#include <stdexcept>
#include <string>

namespace apnn {

// Exit codes used by the command line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_config = 2,
  exit_missing_input = 3,
  exit_numeric = 4,
};

// Malformed or inconsistent configuration (unknown key, bad value, bad section).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A required input file is absent or unreadable.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value produced where a finite one is required.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}
