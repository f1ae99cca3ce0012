#pragma once

#include <stdexcept>
#include <string>

namespace pc2dae {

inline constexpr const char* kToolVersion = "pc2dae 0.1.0";

// Error taxonomy, mapped to CLI exit codes:
//   config_error -> 1, data_error / shape_error / checkpoint_error -> 2,
//   numeric_error -> 3.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct checkpoint_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pc2dae
