#include "lpreg/errors.hpp"

namespace lpreg {

const char* error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SingularGram: return "SingularGram";
    case ErrorKind::ZeroGradient: return "ZeroGradient";
    case ErrorKind::DominationFailure: return "DominationFailure";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::BoostBudgetExceeded: return "BoostBudgetExceeded";
    case ErrorKind::EnergyIncreaseViolation: return "EnergyIncreaseViolation";
    case ErrorKind::PotentialViolation: return "PotentialViolation";
    case ErrorKind::BisectionStall: return "BisectionStall";
  }
  return "Unknown";
}

bool is_input_error(ErrorKind kind) {
  return kind == ErrorKind::InvalidInput || kind == ErrorKind::NonFinite ||
         kind == ErrorKind::RankDeficient;
}

SolverError::SolverError(ErrorKind kind, const std::string& msg)
    : std::runtime_error(std::string(error_name(kind)) + ": " + msg), kind_(kind) {}

void fail(ErrorKind kind, const std::string& msg) { throw SolverError(kind, msg); }

}  // namespace lpreg
