#include "lpreg/lewis.hpp"

#include <algorithm>
#include <cmath>

namespace lpreg {

double half_minus_inv(double p) { return std::isinf(p) ? 0.5 : 0.5 - 1.0 / p; }

Vec lewis_row_scale(const Vec& w, double p) {
  const double e = half_minus_inv(p);
  return w.cwiseMax(kWeightFloor).array().pow(e).matrix();
}

double overestimate_shortfall(const DenseMatrix& A, const Vec& w, double p, SolveCounter* counter) {
  Vec sigma = leverage_scores(A, lewis_row_scale(w, p), counter);
  return (sigma - w).maxCoeff();
}

LewisOverestimate lewis_overestimates(const DenseMatrix& A, double p, std::uint64_t seed, SolveCounter* counter,
                                      SketchPolicy policy) {
  if (!(p >= 2.0)) fail(ErrorKind::InvalidInput, "Lewis overestimates need p >= 2");
  const Index n = A.rows(), d = A.cols();
  const int T = std::max(1, static_cast<int>(std::ceil(10.0 * std::log(static_cast<double>(n)))));
  Vec w = Vec::Constant(n, static_cast<double>(d) / static_cast<double>(n));
  Vec sum = Vec::Zero(n);
  for (int k = 0; k < T; ++k) {
    w = approx_lev(A, lewis_row_scale(w, p), 0.1, derive_seed(seed, static_cast<std::uint64_t>(k)), counter,
                   policy);
    sum += w;
  }
  LewisOverestimate out;
  out.p = p;
  out.iterations = T;
  out.weights = (1.5 / T) * sum;
  out.mass = out.weights.sum();
  out.max_shortfall = overestimate_shortfall(A, out.weights, p, counter);
  const double dd = static_cast<double>(d);
  if (out.max_shortfall > 1e-8)
    fail(ErrorKind::DominationFailure, "weights do not dominate their reweighted leverage scores");
  if (out.mass < dd * (1 - 1e-12) || out.mass > 2 * dd * (1 + 1e-12))
    fail(ErrorKind::DominationFailure, "weight mass outside [d, 2d]");
  return out;
}

NormSandwich norm_sandwich_check(const DenseMatrix& A, const Vec& w, double p, const Vec& x) {
  Vec ax = A.apply(x);
  if (!ax.allFinite() || !w.allFinite()) fail(ErrorKind::NonFinite, "non-finite input to norm sandwich");
  NormSandwich s;
  s.lp = norm_p(ax, p);
  s.weighted_l2 = lewis_row_scale(w, p).cwiseProduct(ax).norm();
  s.upper = std::pow(w.sum(), half_minus_inv(p)) * s.lp;
  return s;
}

namespace {

Vec reg_scale(const Vec& c, const Vec& w, double q) {
  return (c + w).cwiseMax(kWeightFloor).array().pow(0.5 - 1.0 / q).matrix();
}

}  // namespace

RegularizedLewisWeights reg_lewis(const DenseMatrix& A, const Vec& c, double q, std::uint64_t seed,
                                  SolveCounter* counter, SketchPolicy policy) {
  if (!(q > 1.0 && q <= 2.0)) fail(ErrorKind::InvalidInput, "regularized Lewis weights need q in (1, 2]");
  const Index n = A.rows();
  if (c.size() != n) fail(ErrorKind::InvalidInput, "regularizer length does not match rows");
  if ((c.array() < 0.0).any()) fail(ErrorKind::InvalidInput, "regularizer must be nonnegative");
  if (!c.allFinite()) fail(ErrorKind::NonFinite, "regularizer is not finite");

  const double ll = n > 2 ? std::log(std::log(static_cast<double>(n))) : 0.0;
  const int T = static_cast<int>(std::ceil(8.0 * std::max(0.0, ll))) + 4;
  const double eps = 1.0 / 50.0;
  Vec w = Vec::Ones(n);
  for (int k = 0; k < T; ++k) {
    Vec sigma = approx_lev(A, reg_scale(c, w, q), eps, derive_seed(seed, static_cast<std::uint64_t>(k)), counter,
                           policy);
    Vec base = (c + w).cwiseMax(kWeightFloor);
    Vec next = (base.array().pow(2.0 / q - 1.0) * (sigma + c).array()).pow(q / 2.0).matrix() - c;
    for (Index i = 0; i < n; ++i) {
      if (next(i) < 0.0) {
        if (next(i) < -1e-12 * (1.0 + c(i)))
          fail(ErrorKind::NegativeWeight, "regularized weight update went negative");
        next(i) = 0.0;
      }
    }
    w = next;
  }
  RegularizedLewisWeights out;
  out.c = c;
  out.q = q;
  out.iterations = T;
  out.weights = approx_lev(A, reg_scale(c, w, q), eps, derive_seed(seed, static_cast<std::uint64_t>(T)), counter,
                           policy);
  return out;
}

Vec reg_lewis_ratio(const DenseMatrix& A, const Vec& w, const Vec& c, double q) {
  Vec sigma = leverage_scores(A, reg_scale(c, w, q));
  return w.cwiseQuotient(sigma.cwiseMax(1e-300));
}

double reg_lewis_residual(const DenseMatrix& A, const Vec& w, const Vec& c, double q) {
  Vec sigma = leverage_scores(A, reg_scale(c, w, q));
  return ((w - sigma).cwiseAbs().array() / (w + c).cwiseMax(1e-300).array()).maxCoeff();
}

Vec reg_lewis_update(const DenseMatrix& A, const Vec& u, const Vec& c, double q) {
  Vec sigma = leverage_scores(A, reg_scale(c, u, q));
  Vec base = (c + u).cwiseMax(kWeightFloor);
  return (base.array().pow(2.0 / q - 1.0) * (sigma + c).array()).pow(q / 2.0).matrix() - c;
}

Vec reg_lewis_fixed_point(const DenseMatrix& A, const Vec& c, double q, double tol, int max_iter) {
  Vec w = Vec::Ones(A.rows());
  for (int it = 0; it < max_iter; ++it) {
    Vec next = reg_lewis_update(A, w, c, q).cwiseMax(0.0);
    const double change = ((next - w).cwiseAbs().array() / (w + c).cwiseMax(1e-300).array()).maxCoeff();
    w = next;
    if (change <= tol) return w;
  }
  fail(ErrorKind::NoConvergence, "regularized Lewis fixed point did not converge");
}

Vec exact_lewis_oracle(const DenseMatrix& A, double p, double tol, int max_iter) {
  if (!(p >= 2.0 && p < 4.0)) fail(ErrorKind::InvalidInput, "exact Lewis oracle needs 2 <= p < 4");
  Vec w = leverage_scores(A);
  const double e = 1.0 - 2.0 / p;
  for (int it = 0; it < max_iter; ++it) {
    Vec wf = w.cwiseMax(kWeightFloor);
    Vec sigma = leverage_scores(A, wf.array().pow(e / 2.0).matrix());
    if ((w - sigma).cwiseAbs().maxCoeff() <= tol) return w;
    // sigma_i = w_i^{1-2/p} tau_i, and the update is w_i <- tau_i^{p/2}.
    Vec tau = sigma.array() / wf.array().pow(e);
    w = tau.array().pow(p / 2.0).matrix();
  }
  fail(ErrorKind::NoConvergence, "Lewis fixed point did not converge");
}

double lewis_potential(const DenseMatrix& A, const Vec& v, double p, Index i) {
  DiagonalWeights dw(v.cwiseMax(kWeightFloor).array().pow(1.0 - 2.0 / p).matrix());
  Vec ai = A.entries().row(i).transpose();
  GramSystem sys(A, dw);
  const double t = ai.dot(sys.solve(ai));
  return std::log(std::pow(std::max(v(i), kWeightFloor), -2.0 / p) * t);
}

}  // namespace lpreg
