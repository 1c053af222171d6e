#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace eulerbody {

/// Bad user input: config values, mesh requests, CLI arguments. Maps to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Anything that goes wrong inside the numerics. Maps to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidStateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// det(J_X) wandered too far from 1.
class DiffeomorphismError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// g^{ij} lost positive definiteness.
class DegradedMetricError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AssemblyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Linear solve that did not reach tolerance; carries the residual history.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : NumericalError(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

class ProjectionError : public NumericalError {
 public:
  ProjectionError(const std::string& what, double residual)
      : NumericalError(what), residual(residual) {}
  double residual;
};

/// Fixed-point iteration inside a time step failed; the caller should retry with a smaller dt.
class StepFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Requested dt violates the transport CFL bound.
class CflViolation : public StepFailure {
 public:
  CflViolation(const std::string& what, double cfl) : StepFailure(what), cfl(cfl) {}
  double cfl;
};

}  // namespace eulerbody
