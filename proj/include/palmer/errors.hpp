#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace palmer {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments, bad config, or a system definition that fails its
// self-consistency probes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Evaluation outside a computed span or at an excluded point (x = 0 for
// densities, non-finite derivative inside the integrator).
class DomainError : public Error {
 public:
  DomainError(const std::string& msg, double t, Eigen::VectorXd state)
      : Error(msg), t(t), state(std::move(state)) {}
  explicit DomainError(const std::string& msg) : Error(msg) {}
  double t = 0;
  Eigen::VectorXd state;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// Step budget exhausted. Carries whatever part of the solution was
// completed so callers can inspect how far the run got.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& msg, double t_reached) : Error(msg), t_reached(t_reached) {}
  double t_reached = 0;
};

// An improper-integral truncation would need to pass the configured floor.
// Carries the best-effort value together with the honest unresolved tail.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& msg, Eigen::VectorXd value, double truncation_point,
                  double tail_bound)
      : Error(msg),
        value(std::move(value)),
        truncation_point(truncation_point),
        tail_bound(tail_bound) {}
  Eigen::VectorXd value;
  double truncation_point = 0;
  double tail_bound = 0;
};

// Iteration or tail-window stabilization did not converge.
class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& msg, double residual = 0)
      : Error(msg), residual(residual) {}
  double residual = 0;
};

// A required callback (e.g. a second derivative) is absent.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Two independent routes to the same quantity disagree beyond tolerance.
class InconsistencyError : public Error {
 public:
  InconsistencyError(const std::string& msg, double a, double b) : Error(msg), lhs(a), rhs(b) {}
  double lhs = 0, rhs = 0;
};

// Sampled transition norms grow with the gap: no exponentially stable fit.
// Optionally carries the offending observation (norm, eigenvalue, ...).
class StabilityError : public Error {
 public:
  explicit StabilityError(const std::string& msg, double observed = 0)
      : Error(msg), observed(observed) {}
  double observed = 0;
};

}  // namespace palmer
