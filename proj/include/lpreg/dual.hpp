#pragma once

#include "lpreg/lewis.hpp"
#include "lpreg/refinement.hpp"

namespace lpreg {

// min ||y||_p subject to U^T y = v, U = [A extra], with an l2 term y^T R y for the
// oracle. p = q / (q - 1) is the dual exponent.
struct DualInstance {
  const DenseMatrix* A = nullptr;
  Mat extra;  // n x k trailing columns of U (b, and g for step problems)
  Vec v;      // length d + k
  Vec R;      // length n, nonnegative
  double p = 2.0;

  Index rows() const { return A->rows(); }
  Index cols() const { return A->cols() + extra.cols(); }
  RowMat stacked() const;
};

inline double dual_exponent(double q) { return q / (q - 1.0); }

// Feasibility form of the dual: U = [A b], v = (0, ..., 0, 1), R = 0.
// Infeasible when b lies in the column space of A.
DualInstance dual_reduce(const DenseMatrix& A, const Vec& b, double q, SolveCounter* counter = nullptr);

// argmin_{U^T y = v} y^T D y for positive diagonal D, through A-block solves and
// a small Schur complement on the extra columns. One Gram solve.
Vec stacked_min_energy(const DualInstance& inst, const Vec& D, SolveCounter* counter = nullptr);

struct SmallOracleResult {
  Vec y;
  Vec weights;  // regularized Lewis weights of U
  Vec D;        // d^{1-2/p} R + W^{1-2/p}
};

SmallOracleResult oracle_small(const DualInstance& inst, std::uint64_t seed, SolveCounter* counter = nullptr);

// x = argmin ||A x - b - lambda sign(y)|y|^{p-1}||_2 with lambda picked by
// golden-section search on ||A x - b||_q.
struct PrimalRecovery {
  Vec x;
  double lambda = 0.0;
  double objective = 0.0;  // ||A x - b||_q
};

PrimalRecovery primal_recover(const DenseMatrix& A, const Vec& b, const Vec& y_dual, double p,
                              SolveCounter* counter = nullptr);

// |b^T y'| / ||y'||_p with y' the projection of y onto ker A^T; a certified lower
// bound on min ||A x - b||_q.
double dual_certificate(const DenseMatrix& A, const Vec& b, const Vec& y, double p, SolveCounter* counter = nullptr);

// gamma-solver on the identity design for the constraint rows C (= [A b]^T).
// gamma = 4 d^{(p-2)/(2p-2)} with d the column count of the stacked matrix.
GammaSolverContract small_gamma_solver(const DenseMatrix& A, const Vec& b, double p, std::uint64_t seed,
                                       SolveCounter* counter);

// l_q regression for q in (1, 2]; inst.p holds q.
RefineResult solve_dual(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter = nullptr);

}  // namespace lpreg
