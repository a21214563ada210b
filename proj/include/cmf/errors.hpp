#pragma once

#include <stdexcept>
#include <string>

namespace cmf {

// Exit-status classes used by the CLI. Anything else (std::invalid_argument,
// std::out_of_range) is a programming or input-shape error.
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cmf
