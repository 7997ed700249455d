#pragma once

#include "lpreg/lewis.hpp"
#include "lpreg/refinement.hpp"

namespace lpreg {

// f(x) = ||A x - b||_p^p (+ ridge ||x||_M^2) with the metric M = A^T W^{1-2/p} A
// built from Lewis overestimates w. M is only ever applied through A.
class PnormObjective {
 public:
  PnormObjective(const DenseMatrix& A, Vec b, double p, Vec lewis_weights, double ridge = 0.0);

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Vec residual(const Vec& x) const { return a_.apply(x) - b_; }
  // p (p-1) |A x - b|^{p-2}, the row weights of the Hessian of the p-norm part.
  Vec hessian_weights(const Vec& x) const;

  double m_norm(const Vec& u) const;
  Vec m_apply(const Vec& u) const;
  // ||v||_{M^{-1}}; one Gram solve.
  double m_inv_norm(const Vec& v, SolveCounter* counter) const;
  Vec m_solve(const Vec& v, SolveCounter* counter) const;

  const DenseMatrix& A() const { return a_; }
  const Vec& b() const { return b_; }
  double p() const { return p_; }
  double ridge() const { return ridge_; }
  const Vec& metric_weights() const { return mw_; }  // W^{1-2/p}
  double reg_coeff() const;                          // e p^p

 private:
  const DenseMatrix& a_;
  Vec b_;
  double p_;
  Vec mw_;
  double ridge_;
};

struct ProxProblem {
  const PnormObjective* f = nullptr;
  Vec center;
};

// Value and gradient of f(x) + e p^p ||x - center||_M^p.
double prox_value(const ProxProblem& prob, const Vec& x);
Vec prox_gradient(const ProxProblem& prob, const Vec& x);

struct ProxCertificate {
  Vec x;
  double residual = 0.0;   // ||grad f(x) + e p^{p+1} ||x-y||_M^{p-2} M (x-y)||_{M^{-1}}
  double threshold = 0.0;  // e alpha p^{p+1} ||x-y||_M^{p-1} + delta
  double alpha = 0.0;
  double delta = 0.0;
  int iterations = 0;      // relative-smoothness steps
  int probes = 0;          // tau probes, one Gram solve each
  double last_tau = 0.0;
  double tau_condition = 0.0;  // relative error of tau^{2/(p-2)} = ||u||_M^2 at the last probe
  bool monotone = true;

  bool certified() const { return residual <= threshold; }
};

struct ProxOptions {
  int max_iterations = 2000;
  int max_doublings = 200;
};

ProxCertificate prox_solve(const ProxProblem& prob, const Vec& x0, double tol, SolveCounter* counter = nullptr,
                           const ProxOptions& options = {});

// Largest violation ratio of (1/e) h'' <= f_y'' <= e h'' over random directions; <= 1 means none.
double hessian_stability_check(const Vec& y, const Vec& x, const PnormObjective& f, int samples,
                               std::uint64_t seed = 0);

// ||y||_p^p + v^T delta + (p-1)/(p 2^p) ||delta||_p^p <= ||y + delta||_p^p.
InequalitySides strong_convexity_sides(const Vec& y, const Vec& delta, double p);
bool strong_convexity_check(const Vec& y, const Vec& delta, double p);

// 2^{3/2} d^{1/2-1/p} err^{1/p}
double distance_bound(Index d, double p, double err);

struct MsOptions {
  int max_bisection = 60;
  // Stop as soon as ||Ax-b||_p <= (1 + stop_ratio) * certified lower bound (0 disables).
  double stop_ratio = 0.0;
  long long budget = 0;  // prox calls; 0 means the worst-case count
};

struct MsResult {
  Vec x;
  double value = 0.0;
  double lower_bound = 0.0;  // certified lower bound on min ||Ax-b||_p
  SolveReport report;
};

MsResult ms_accelerate(const PnormObjective& f, const Vec& x0, double eps, double dist_bound,
                       SolveCounter* counter = nullptr, const MsOptions& options = {});

// f(x') - f* <= err / 2 given f(x0) - f* <= err.
MsResult halve_error(const PnormObjective& f, const Vec& x0, double err, SolveCounter* counter = nullptr,
                     const MsOptions& options = {});

struct AccelOptions {
  bool ridge = false;
  double ridge_coeff = 1e-12;
  int max_halvings = 200;
};

RefineResult solve_accel(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter = nullptr,
                         const AccelOptions& options = {});

}  // namespace lpreg
