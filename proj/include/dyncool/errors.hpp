#pragma once

#include <stdexcept>
#include <string>

namespace dyncool {

// Malformed input: bad parameter ranges, unknown presets, unparsable config.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The requested physics is outside the model's validity: dynamical
// instability, truncation cutoff too small for the state.
class PhysicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integrator failure, singular linear system, or a state that violates its
// physical invariants beyond tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dyncool
