#pragma once

#include <cstdint>

#include "lpreg/linalg.hpp"

namespace lpreg {

// Weights w with d <= ||w||_1 <= 2d that dominate the leverage scores of
// W^{1/2-1/p} A. p = kInf is treated as 1/p = 0.
struct LewisOverestimate {
  Vec weights;
  double p = 2.0;
  double mass = 0.0;
  // Certificate values from the exact recheck.
  double max_shortfall = 0.0;  // max_i sigma_i - w_i
  int iterations = 0;
};

inline constexpr double kWeightFloor = 1e-14;

// Exponent 1/2 - 1/p with the p = infinity convention.
double half_minus_inv(double p);

// Row scaling w^{1/2-1/p} with the weight floor applied.
Vec lewis_row_scale(const Vec& w, double p);

LewisOverestimate lewis_overestimates(const DenseMatrix& A, double p, std::uint64_t seed,
                                      SolveCounter* counter = nullptr,
                                      SketchPolicy policy = SketchPolicy::Auto);

// Exact check of the overestimate property; returns max_i (sigma_i - w_i).
double overestimate_shortfall(const DenseMatrix& A, const Vec& w, double p, SolveCounter* counter = nullptr);

struct NormSandwich {
  double lp = 0.0;
  double weighted_l2 = 0.0;
  double upper = 0.0;
};

NormSandwich norm_sandwich_check(const DenseMatrix& A, const Vec& w, double p, const Vec& x);

struct RegularizedLewisWeights {
  Vec weights;
  Vec c;
  double q = 2.0;
  int iterations = 0;
};

RegularizedLewisWeights reg_lewis(const DenseMatrix& A, const Vec& c, double q, std::uint64_t seed,
                                  SolveCounter* counter = nullptr, SketchPolicy policy = SketchPolicy::Auto);

// max_i |w_i - sigma((C+W)^{1/2-1/q} A)_i| / (w_i + c_i), exact leverage scores.
double reg_lewis_residual(const DenseMatrix& A, const Vec& w, const Vec& c, double q);

// Per-row ratio w_i / sigma((C+W)^{1/2-1/q} A)_i.
Vec reg_lewis_ratio(const DenseMatrix& A, const Vec& w, const Vec& c, double q);

// One exact step u -> ((C+U)^{2/q-1}(sigma + c))^{q/2} - c of the contractive map.
Vec reg_lewis_update(const DenseMatrix& A, const Vec& u, const Vec& c, double q);

// Iterates reg_lewis_update with exact leverage scores to a fixed point. Test oracle.
Vec reg_lewis_fixed_point(const DenseMatrix& A, const Vec& c, double q, double tol = 1e-12, int max_iter = 10000);

// Fixed-point iteration for exact Lewis weights, 2 <= p < 4. Test oracle.
Vec exact_lewis_oracle(const DenseMatrix& A, double p, double tol = 1e-10, int max_iter = 10000);

// log(v_i^{-2/p} a_i^T (A^T diag(v)^{1-2/p} A)^{-1} a_i)
double lewis_potential(const DenseMatrix& A, const Vec& v, double p, Index i);

}  // namespace lpreg
