#pragma once

#include <optional>

#include "lpreg/lewis.hpp"
#include "lpreg/refinement.hpp"

namespace lpreg {

struct EnergySolution {
  Vec z;
  double value = 0.0;  // z^T A^T D A z
};

// argmin x^T A^T D A x subject to g^T x = -1 (and C x = 0 when C is given).
EnergySolution energy_solve(const DenseMatrix& A, const DiagonalWeights& D, const Vec& g,
                            SolveCounter* counter = nullptr, const Mat* C = nullptr);

struct MwuConstants {
  double p = 4.0;
  double kappa = 0.0;
  double alpha = 0.0;
  double tau = 0.0;
  long long rounds = 0;     // floor(d^{1/p} / alpha)
  long long boost_cap = 0;  // ceil(32 (20 kappa)^{p-2} / tau^{2/p}) + 8

  static MwuConstants make(double p, Index d);
};

inline constexpr double kMaxMwuP = 16.0;
inline constexpr double kAssertSlack = 2.0;

// Scaled residual problem with an optional feasibility witness.
struct ResidualInstance {
  const DenseMatrix* A = nullptr;
  Vec g;
  Vec R;
  double p = 4.0;
  const Mat* C = nullptr;
  std::optional<Vec> witness;
};

struct MwuState {
  Vec s;
  Vec y;
  Vec z;
  Vec az;
  double phi = 0.0;
  double energy = 0.0;
  double az_pth = 0.0;  // ||A z||_p^p
  long long progress_steps = 0;
  long long boost_steps = 0;
};

// Everything that stays fixed during one oracle run.
class MwuContext {
 public:
  MwuContext(const ResidualInstance& inst, Vec lewis_weights, SolveCounter* counter,
             std::optional<MwuConstants> constants = std::nullopt);

  MwuState initial() const;
  // Recomputes z, A z, energy and Phi from s; one Gram solve.
  void refresh(MwuState& st) const;
  // Resistance diagonal d^{1-2/p} R + S^{p-2}.
  Vec resistances(const Vec& s) const;

  const MwuConstants& constants() const { return k_; }
  MwuConstants& constants() { return k_; }
  const ResidualInstance& instance() const { return inst_; }
  double witness_energy_bound(const MwuState& st) const;
  bool has_witness() const { return inst_.witness.has_value(); }

 private:
  ResidualInstance inst_;
  Vec w_;
  SolveCounter* counter_;
  MwuConstants k_;
  double dscale_;
};

// s_i <- (s_i^{p-2} + tau^{2/p} |(Az)_i|^{p-2} / (4 ||Az||_p^p))^{1/(p-2)} on the boost set, then
// refresh. Returns the size of the boost set.
Index boosting_step(const MwuContext& ctx, MwuState& st);

// y += alpha z, s += alpha |A z|, then refresh.
void progress_step(const MwuContext& ctx, MwuState& st);

struct OracleResult {
  Vec y;
  SolveReport report;
  double final_phi = 0.0;
  double lp_norm = 0.0;      // ||A y||_p
  double quadratic = 0.0;    // y^T A^T R A y
};

OracleResult width_reduced_oracle(const ResidualInstance& inst, std::uint64_t seed, SolveCounter* counter = nullptr,
                                  const LewisOverestimate* weights = nullptr);

// gamma-solver built on the oracle; gamma = (80p)^p. The Lewis overestimates
// are computed once for the design and reused across calls.
GammaSolverContract mwu_gamma_solver(const DenseMatrix& A, double p, std::uint64_t seed, SolveCounter* counter,
                                     SolveReport* tally = nullptr);

// gamma-solver returning the first oracle iterate only: a single solve in
// A^T (d^{1-2/p} R + W^{1-2/p}) A.
GammaSolverContract single_shot_gamma_solver(const DenseMatrix& A, double p, std::uint64_t seed,
                                             SolveCounter* counter);

RefineResult solve_mwu(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter = nullptr);
RefineResult solve_refine(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter = nullptr);

}  // namespace lpreg
