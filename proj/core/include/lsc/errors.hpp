#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lsc {

// Base for every error this library raises on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands (rows/cols, state widths, ...).
struct DimensionError : Error {
  using Error::Error;
};

// Argument outside the mathematically valid set (p-norm selector, rho target, ...).
struct DomainError : Error {
  using Error::Error;
};

// Index outside a container or grid.
struct RangeError : Error {
  using Error::Error;
};

// Input too small to compute the requested statistic or guard exceeded.
struct SizeError : Error {
  using Error::Error;
};

// Statistic undefined on the given data (constant series, batch < 2, ...).
struct StatisticsError : Error {
  using Error::Error;
};

// Malformed or inconsistent configuration (cell kind, widths, files, flags).
struct ConfigurationError : Error {
  using Error::Error;
};

// Iterative numerics failed to converge; carries the iteration count spent.
struct NumericalError : Error {
  std::size_t iterations;
  NumericalError(const std::string& msg, std::size_t iters)
      : Error(msg + " (iterations=" + std::to_string(iters) + ")"), iterations(iters) {}
};

// Filesystem / parse failures for artifacts.
struct IoError : Error {
  using Error::Error;
};

}  // namespace lsc
