#pragma once

#include <stdexcept>
#include <string>

namespace attrivae {

// Invalid configuration or arguments, detected before any work starts.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A loss or activation became NaN/Inf during training or evaluation.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace attrivae
