#pragma once

#include <cmath>
#include <functional>

#include "lpreg/linalg.hpp"
#include "lpreg/report.hpp"

namespace lpreg {

struct ProblemInstance {
  DenseMatrix A;
  Vec b;
  double p = 2.0;
  double eps = 1e-8;
};

// The map x -> A x that refinement works with. The dual path minimises
// ||y||_p directly, which is the identity design.
class RegressionDesign {
 public:
  virtual ~RegressionDesign() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual Vec apply(const Vec& x) const = 0;
  virtual Vec apply_t(const Vec& r) const = 0;
  // [A^T D A, C^T; C, 0] [x; mu] = [r1; r2]; counts one Gram solve.
  virtual BorderedSolution bordered(const Vec& D, const Mat& C, const Vec& r1, const Vec& r2,
                                    SolveCounter* counter) const = 0;
};

class MatrixDesign final : public RegressionDesign {
 public:
  explicit MatrixDesign(const DenseMatrix& A) : a_(A) {}
  Index rows() const override { return a_.rows(); }
  Index cols() const override { return a_.cols(); }
  Vec apply(const Vec& x) const override { return a_.apply(x); }
  Vec apply_t(const Vec& r) const override { return a_.apply_t(r); }
  BorderedSolution bordered(const Vec& D, const Mat& C, const Vec& r1, const Vec& r2,
                            SolveCounter* counter) const override;
  const DenseMatrix& matrix() const { return a_; }

 private:
  const DenseMatrix& a_;
};

class IdentityDesign final : public RegressionDesign {
 public:
  explicit IdentityDesign(Index n) : n_(n) {}
  Index rows() const override { return n_; }
  Index cols() const override { return n_; }
  Vec apply(const Vec& x) const override { return x; }
  Vec apply_t(const Vec& r) const override { return r; }
  BorderedSolution bordered(const Vec& D, const Mat& C, const Vec& r1, const Vec& r2,
                            SolveCounter* counter) const override;

 private:
  Index n_;
};

// C x = v.
struct LinearConstraint {
  Mat C;
  Vec v;
};

// One call of a gamma-solver: find Delta with C Delta = 0, g^T Delta = -nu and
// Delta^T A^T R A Delta, ||A Delta||_p^p small relative to the optimum.
struct GammaRequest {
  double nu = 1.0;
  Vec g;
  Vec r;
  const Mat* C = nullptr;
  // Upper bound on the optimum, attained by *witness when that is set.
  double opt_bound = 1.0;
  const Vec* witness = nullptr;
};

struct GammaSolverContract {
  double gamma = 1.0;
  std::function<Vec(const GammaRequest&)> solve;
};

struct GammaCertificate {
  double linear = 0.0;     // g^T Delta
  double quadratic = 0.0;  // Delta^T A^T R A Delta
  double pth = 0.0;        // ||A Delta||_p^p
  double constraint_violation = 0.0;

  // Both inequalities of the contract against a known optimum bound.
  bool within(double gamma, double p, double opt) const {
    return quadratic <= gamma * opt && pth <= std::pow(gamma, p - 1.0) * opt;
  }
};

GammaCertificate certify_gamma(const RegressionDesign& A, const GammaRequest& req, const Vec& delta, double p);

struct BregmanTerms {
  Vec g;  // p |x|^{p-2} x
  Vec r;  // |x|^{p-2}
};

BregmanTerms bregman_terms(const Vec& x, double p);

struct ScalarBounds {
  double lower = 0.0;
  double upper = 0.0;
  double actual = 0.0;
};

ScalarBounds scalar_refine_bounds(double x, double delta, double p);

struct InequalitySides {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double rel = 1e-12) const { return lhs <= rhs + rel * (std::abs(rhs) + std::abs(lhs)) + 1e-300; }
};

// (a+b)^k - a^k <= 3k a^{k-1} b + 3 k^k b^k, k >= 2.
InequalitySides power_gap_bound(double a, double b, double k);
// (a+b)^k - a^k <= 4^k (a^{k-1} b + b^k), k >= 1.
InequalitySides power_gap_bound4(double a, double b, double k);
// |x+y|^{p-2} <= e |x|^{p-2} + p^{p-2} |y|^{p-2}.
InequalitySides shifted_power_bound(double x, double y, double p);
// |x+y|^m <= |a x|^m + |b y|^m with 1/a + 1/b = 1, a > 1.
InequalitySides split_power_bound(double x, double y, double m, double a);

// Lower bound on min ||A x - b||_p over {C x = v} from a residual r, built
// from the projection of |r|^{p-2} r onto the dual-feasible set.
double dual_lower_bound(const RegressionDesign& A, const Vec& b, double p, const Vec& residual,
                        const LinearConstraint* constraint, SolveCounter* counter);

struct RefineOptions {
  double c_ref = 64.0;
  int max_rounds = 2000;
  int max_shrinks = 60;
};

struct RefineResult {
  Vec x;
  double objective = 0.0;    // ||A x - b||_p
  double lower_bound = 0.0;  // certified lower bound on OPT
  SolveReport report;
};

RefineResult refine_to_accuracy(const RegressionDesign& A, const Vec& b, double p, double eps,
                                const GammaSolverContract& solver, const LinearConstraint* constraint = nullptr,
                                SolveCounter* counter = nullptr, const RefineOptions& options = {});

RefineResult refine_to_accuracy(const ProblemInstance& inst, const GammaSolverContract& solver,
                                const LinearConstraint* constraint = nullptr, SolveCounter* counter = nullptr,
                                const RefineOptions& options = {});

// Exact gamma-solver that minimises the quadratic part only; p = 2 reference.
GammaSolverContract quadratic_gamma_solver(const RegressionDesign& A, SolveCounter* counter);

}  // namespace lpreg
