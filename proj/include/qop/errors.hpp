#pragma once

#include <stdexcept>
#include <string>

namespace qop {

// Bad command-line flags or malformed config documents.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A privacy split or noise calibration that cannot be satisfied
// (e.g. a gamma inversion outside its domain).
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// Nonfinite iterates inside the splitting solver.
class SolverDivergenceError : public std::runtime_error {
 public:
  SolverDivergenceError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

}  // namespace qop
