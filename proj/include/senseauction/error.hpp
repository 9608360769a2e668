#pragma once

#include <stdexcept>

namespace senseauction {

/// Invalid or inconsistent configuration (world, scenario, weights).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A point or segment outside the world extent.
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A file could not be opened or written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// Absolute tolerance for monetary comparisons (CNY).
inline constexpr double kMoneyTol = 1e-9;

}  // namespace senseauction
