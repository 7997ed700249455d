#pragma once

#include "lpreg/lewis.hpp"
#include "lpreg/refinement.hpp"

namespace lpreg {

struct LseValue {
  double value = 0.0;
  Vec gradient;  // softmax weights, sum to one
};

// t log sum exp(u_i / t), evaluated with the max subtracted.
LseValue lse_eval(const Vec& u, double t);

// lse_t(A x - b), or lse_t over (A x - b, b - A x) when symmetric.
class LseObjective {
 public:
  LseObjective(const DenseMatrix& A, Vec b, double t, bool symmetric = true);

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  // u^T H(x) u
  double hessian_form(const Vec& x, const Vec& u) const;
  // Softmax weights over the lifted residual.
  Vec softmax(const Vec& x) const;
  // Per-row signed softmax mass: pi^+ - pi^- (symmetric) or pi.
  Vec row_weights(const Vec& x) const;

  const DenseMatrix& A() const { return a_; }
  const Vec& b() const { return b_; }
  double t() const { return t_; }
  bool symmetric() const { return symmetric_; }
  Index arity() const { return symmetric_ ? 2 * a_.rows() : a_.rows(); }

 private:
  Vec lifted(const Vec& r) const;
  const DenseMatrix& a_;
  Vec b_;
  double t_;
  bool symmetric_;
};

struct QscReport {
  double smooth_ratio = 0.0;  // worst u^T H u / ((1/t) ||u||_M^2)
  double qsc_ratio = 0.0;     // worst |D^3[u,u,h]| / ((2/t) u^T H u ||h||_M)
  int samples = 0;
  bool ok() const { return smooth_ratio <= 1.0 + 1e-8 && qsc_ratio <= 1.0 + 1e-6; }
};

// Samples direction pairs (u, h); M = A^T diag(w) A. Third derivatives by central
// differences of the Hessian form.
QscReport qsc_check(const LseObjective& f, const Vec& w, const Vec& x, int directions, std::uint64_t seed = 0);
inline bool qsc_holds(const LseObjective& f, const Vec& w, const Vec& x, int directions, std::uint64_t seed = 0) {
  return qsc_check(f, w, x, directions, seed).ok();
}

// |b^T y'| / ||y'||_1 with y' the projection of y onto ker A^T.
double linf_certificate(const DenseMatrix& A, const Vec& b, const Vec& y, SolveCounter* counter = nullptr);

struct LinfOptions {
  int max_stages = 80;
  int max_newton = 400;
};

RefineResult linf_regress(const DenseMatrix& A, const Vec& b, double eps, std::uint64_t seed,
                          SolveCounter* counter = nullptr, const LinfOptions& options = {});

}  // namespace lpreg
