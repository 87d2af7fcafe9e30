#pragma once

#include <stdexcept>
#include <string>

namespace hypcap {

/// Input outside the domain of a mathematical function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Overlapping, tangent or escaping boundary curves.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative or direct linear solve failed.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual = 0.0, int iterations = 0)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// The optimizer could not find or keep a feasible configuration.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hypcap
