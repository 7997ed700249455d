#pragma once

#include <stdexcept>
#include <string>

namespace lpreg {

enum class ErrorKind {
  InvalidInput,
  NonFinite,
  RankDeficient,
  SingularGram,
  ZeroGradient,
  DominationFailure,
  NegativeWeight,
  NoConvergence,
  BudgetExceeded,
  Infeasible,
  BoostBudgetExceeded,
  EnergyIncreaseViolation,
  PotentialViolation,
  BisectionStall,
};

const char* error_name(ErrorKind kind);

// Malformed or degenerate input, as opposed to a solver that gave up.
bool is_input_error(ErrorKind kind);

class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorKind kind, const std::string& msg);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& msg);

}  // namespace lpreg
