#pragma once

#include <stdexcept>
#include <string>

namespace mixboot {

// Each error class maps to one CLI exit status.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 2;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 3;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 4;
};

}  // namespace mixboot
