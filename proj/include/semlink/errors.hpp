// Error types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace semlink {

// Base class for everything this library throws on purpose.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid scalar input (non-finite argument, value outside the domain).
class domain_error : public error {
 public:
  explicit domain_error(const std::string& what) : error(what) {}
};

// Inconsistent system configuration (dimension mismatch, bad budget, ...).
class config_error : public error {
 public:
  explicit config_error(const std::string& what) : error(what) {}
};

// Query outside a table's rate range.
class range_error : public error {
 public:
  explicit range_error(const std::string& what) : error(what) {}
};

// Uplink-downlink power transform has no valid solution (singular system
// or negative power components). Never regularized silently.
class duality_error : public error {
 public:
  explicit duality_error(const std::string& what) : error(what) {}
};

// Convex subproblem could not be posed or solved from the given point.
class sca_error : public error {
 public:
  explicit sca_error(const std::string& what) : error(what) {}
};

// No strictly feasible start for the interior-point solver.
class infeasible_error : public error {
 public:
  explicit infeasible_error(const std::string& what) : error(what) {}
};

// Regression on degenerate data.
class fit_error : public error {
 public:
  explicit fit_error(const std::string& what) : error(what) {}
};

}  // namespace semlink
