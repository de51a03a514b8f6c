#pragma once

#include <stdexcept>
#include <string>

namespace islab {

// Base class for everything thrown by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-supplied configuration (field files, experiment configs, parameter caps).
struct ConfigError : Error {
  using Error::Error;
};

// Chart operation outside the injectivity radius of the space.
struct ChartError : Error {
  using Error::Error;
};

// Flow queried beyond the configured integration horizon.
struct HorizonError : Error {
  using Error::Error;
};

// NaN/Inf encountered while integrating or solving.
struct NonFiniteError : Error {
  using Error::Error;
};

// A documented operation precondition failed (rejection carries the computed bound).
struct PreconditionError : Error {
  using Error::Error;
};

}  // namespace islab
