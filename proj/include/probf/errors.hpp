#ifndef PROBF_ERRORS_HPP
#define PROBF_ERRORS_HPP

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace probf {

/// Precondition / dimension contract broken by the caller.
class ContractViolation : public std::logic_error {
public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

/// A state became non-finite during integration. Carries the step index at
/// which the blow-up was detected; the partial trajectory stays with the
/// caller (rollout attaches it before rethrowing).
class IntegrationBlowup : public std::runtime_error {
public:
  IntegrationBlowup(const std::string& what, int step_index)
      : std::runtime_error(what), step(step_index) {}
  int step;
};

/// Cholesky factorization failed even at the maximum jitter level.
class ConditioningError : public std::runtime_error {
public:
  ConditioningError(const std::string& what, double max_jitter_tried)
      : std::runtime_error(what), max_jitter(max_jitter_tried) {}
  double max_jitter;
};

/// Interior-point iteration cap reached without meeting the gap tolerance.
class SolverStall : public std::runtime_error {
public:
  SolverStall(const std::string& what, Eigen::VectorXd last_iterate)
      : std::runtime_error(what), iterate(std::move(last_iterate)) {}
  Eigen::VectorXd iterate;
};

/// Bad experiment/CLI configuration.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace probf

#endif  // PROBF_ERRORS_HPP
