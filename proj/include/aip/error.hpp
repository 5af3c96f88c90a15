#pragma once

#include <stdexcept>
#include <string>

namespace aip {

// Input files or in-memory data violating a schema or domain constraint.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values, failed convergence, undefined statistics.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aip
