#include "lpreg/refinement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace lpreg {

BorderedSolution MatrixDesign::bordered(const Vec& D, const Mat& C, const Vec& r1, const Vec& r2,
                                        SolveCounter* counter) const {
  return bordered_solve(a_, DiagonalWeights(D), C, r1, r2, counter);
}

BorderedSolution IdentityDesign::bordered(const Vec& D, const Mat& C, const Vec& r1, const Vec& r2,
                                          SolveCounter* counter) const {
  if (D.size() != n_ || r1.size() != n_) fail(ErrorKind::InvalidInput, "bordered solve size mismatch");
  if (!D.allFinite() || !r1.allFinite()) fail(ErrorKind::NonFinite, "bordered solve input not finite");
  Vec dinv = D.cwiseMax(1e-300).cwiseInverse();
  if (counter) counter->record_gram();
  BorderedSolution out;
  if (C.rows() == 0) {
    out.x = dinv.cwiseProduct(r1);
    out.multipliers = Vec(0);
    return out;
  }
  // QR of F = D^{-1/2} C^T; the normal-equation Schur system C D^{-1} C^T
  // squares cond(C) and loses the step near the optimum
  const Index k = C.rows();
  Vec dh = dinv.cwiseSqrt();
  Mat F = dh.asDiagonal() * C.transpose();
  Eigen::HouseholderQR<Mat> qr(F);
  Mat Q = qr.householderQ() * Mat::Identity(n_, k);
  Mat Rm = qr.matrixQR().topLeftCorner(k, k);
  auto R = Rm.triangularView<Eigen::Upper>();
  Vec u = dh.cwiseProduct(r1);
  Vec rt = R.transpose().solve(r2);
  Vec qu = Q.transpose() * u;
  out.x = dh.cwiseProduct(u - Q * (qu - rt));
  out.multipliers = R.solve(qu - rt);
  return out;
}

GammaCertificate certify_gamma(const RegressionDesign& A, const GammaRequest& req, const Vec& delta, double p) {
  GammaCertificate c;
  Vec ad = A.apply(delta);
  c.linear = req.g.dot(delta);
  c.quadratic = (req.r.array() * ad.array().square()).sum();
  c.pth = norm_p_pow(ad, p);
  if (req.C && req.C->rows() > 0) c.constraint_violation = (*req.C * delta).cwiseAbs().maxCoeff();
  return c;
}

BregmanTerms bregman_terms(const Vec& x, double p) {
  BregmanTerms t;
  t.r = x.cwiseAbs().array().pow(p - 2.0).matrix();
  t.g = p * t.r.cwiseProduct(x);
  return t;
}

ScalarBounds scalar_refine_bounds(double x, double delta, double p) {
  const double r = std::pow(std::abs(x), p - 2.0);
  const double g = p * r * x;
  const double ad = std::abs(delta);
  ScalarBounds s;
  s.actual = std::pow(std::abs(x + delta), p) - std::pow(std::abs(x), p) - g * delta;
  s.lower = p / 8.0 * r * delta * delta + std::pow(2.0, -p - 1.0) * std::pow(ad, p);
  s.upper = 2.0 * p * p * r * delta * delta + std::pow(p, p) * std::pow(ad, p);
  return s;
}

InequalitySides power_gap_bound(double a, double b, double k) {
  return {std::pow(a + b, k) - std::pow(a, k), 3.0 * k * std::pow(a, k - 1.0) * b + 3.0 * std::pow(k, k) * std::pow(b, k)};
}

InequalitySides power_gap_bound4(double a, double b, double k) {
  return {std::pow(a + b, k) - std::pow(a, k), std::pow(4.0, k) * (std::pow(a, k - 1.0) * b + std::pow(b, k))};
}

InequalitySides shifted_power_bound(double x, double y, double p) {
  const double m = p - 2.0;
  return {std::pow(std::abs(x + y), m), std::exp(1.0) * std::pow(std::abs(x), m) + std::pow(p, m) * std::pow(std::abs(y), m)};
}

InequalitySides split_power_bound(double x, double y, double m, double a) {
  const double b = a / (a - 1.0);
  return {std::pow(std::abs(x + y), m), std::pow(std::abs(a * x), m) + std::pow(std::abs(b * y), m)};
}

double dual_lower_bound(const RegressionDesign& A, const Vec& b, double p, const Vec& residual,
                        const LinearConstraint* constraint, SolveCounter* counter) {
  const double scale = residual.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return 0.0;
  Vec u = residual / scale;
  Vec g = u.cwiseAbs().array().pow(p - 2.0).matrix().cwiseProduct(u);
  const Index d = A.cols();
  Mat C = constraint ? constraint->C : Mat(0, d);
  Vec r2 = Vec::Zero(C.rows());
  BorderedSolution sol = A.bordered(Vec::Ones(A.rows()), C, A.apply_t(g), r2, counter);
  Vec y = g - A.apply(sol.x);
  double num = -b.dot(y);
  if (constraint && C.rows() > 0) num += constraint->v.dot(sol.multipliers);
  const double q = p / (p - 1.0);
  const double den = norm_p(y, q);
  if (!(den > 0.0) || !std::isfinite(num)) return 0.0;
  return std::abs(num) / den;
}

namespace {

// argmin_{eta >= 0} sum |r + eta u|^p by bisection on the derivative.
double line_search_pth(const Vec& r, const Vec& u, double p) {
  auto deriv = [&](double eta) {
    Vec z = r + eta * u;
    return (z.cwiseAbs().array().pow(p - 2.0) * z.array() * u.array()).sum();
  };
  if (!(deriv(0.0) < 0.0)) return 0.0;
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (deriv(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 400) return lo;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (deriv(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double fl = norm_p_pow(r + lo * u, p), fh = norm_p_pow(r + hi * u, p);
  return fh < fl ? hi : lo;
}

// argmax_{t >= 0} t*lin - t^2 quad - t^p pth; lin > 0.
double best_ray_scale(double lin, double quad, double pth, double p) {
  auto deriv = [&](double t) { return lin - 2.0 * t * quad - p * std::pow(t, p - 1.0) * pth; };
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (deriv(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 2000) break;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (deriv(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

RefineResult refine_to_accuracy(const RegressionDesign& A, const Vec& b, double p, double eps,
                                const GammaSolverContract& solver, const LinearConstraint* constraint,
                                SolveCounter* counter, const RefineOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(p >= 2.0) || std::isinf(p)) fail(ErrorKind::InvalidInput, "refinement needs finite p >= 2");
  if (!(eps > 0.0)) fail(ErrorKind::InvalidInput, "eps must be positive");
  const Index n = A.rows(), d = A.cols();
  if (b.size() != n) fail(ErrorKind::InvalidInput, "rhs length does not match rows");
  if (!b.allFinite()) fail(ErrorKind::NonFinite, "rhs is not finite");
  SolveCounter local;
  SolveCounter* ctr = counter ? counter : &local;
  const std::int64_t gram0 = ctr->gram_solves;

  Mat C = constraint ? constraint->C : Mat(0, d);
  Vec cv = constraint ? constraint->v : Vec(0);
  if (C.cols() != d || cv.size() != C.rows()) fail(ErrorKind::InvalidInput, "constraint shape mismatch");

  RefineResult out;
  out.report.p = p;
  out.report.eps = eps;
  out.report.n = n;
  out.report.d = d;

  Vec x;
  if (C.rows() == 0 && b.cwiseAbs().maxCoeff() == 0.0) {
    x = Vec::Zero(d);
  } else {
    PhaseScope ps(ctr, "warm_start");
    x = A.bordered(Vec::Ones(n), C, A.apply_t(b), cv, ctr).x;
  }
  if (!x.allFinite()) fail(ErrorKind::Infeasible, "no feasible starting point");

  const double bscale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  const double budget = options.c_ref * std::pow(p, 3.5) * solver.gamma *
                        std::log(static_cast<double>(n + d) / eps);
  double best_lb = 0.0;
  std::int64_t calls = 0, rejected = 0, rounds = 0, max_violation_events = 0;
  double max_violation = 0.0;

  Vec r = A.apply(x) - b;
  double f = norm_p_pow(r, p);
  for (; rounds < options.max_rounds; ++rounds) {
    const double obj = std::pow(f, 1.0 / p);
    if (obj <= 1e-14 * bscale) break;
    {
      PhaseScope ps(ctr, "certificate");
      best_lb = std::max(best_lb, dual_lower_bound(A, b, p, r, constraint, ctr));
    }
    if (obj <= (1.0 + eps) * best_lb) break;

    // Residual problem in the solver's normalisation: Delta = Delta' / p makes
    // the l2 weights 2|r|^{p-2} and the lp coefficient one.
    BregmanTerms bt = bregman_terms(r, p);
    Vec g_eff = A.apply_t(bt.g) / p;
    Vec r_eff = 2.0 * bt.r;
    Vec cand;
    {
      PhaseScope ps(ctr, "refine");
      const double rmax = std::max(r_eff.maxCoeff(), 1e-300);
      cand = A.bordered(r_eff.cwiseMax(1e-14 * rmax), C, -g_eff, Vec::Zero(C.rows()), ctr).x;
    }
    Vec ac = A.apply(cand);
    const double lin = -g_eff.dot(cand);
    const double quad = (r_eff.array() * ac.array().square()).sum();
    const double pth = norm_p_pow(ac, p);
    if (!(lin > 0.0) || !std::isfinite(lin)) break;
    const double tstar = best_ray_scale(lin, quad, pth, p);

    bool accepted = false;
    double shrink = 1.0;
    for (int attempt = 0; attempt < options.max_shrinks && !accepted; ++attempt) {
      const double t = tstar / shrink;
      Vec witness = t * cand;
      GammaRequest req;
      req.nu = t * lin;
      req.g = g_eff;
      req.r = r_eff;
      req.C = &C;
      req.opt_bound = t * t * quad + std::pow(t, p) * pth;
      req.witness = &witness;
      Vec delta;
      {
        PhaseScope ps(ctr, "gamma_solver");
        delta = solver.solve(req);
      }
      ++calls;
      if (static_cast<double>(calls) > budget) fail(ErrorKind::BudgetExceeded, "gamma-solver call budget exceeded");
      if (delta.size() > 0 && delta.isZero(0.0)) break;  // solver has no step to offer
      if (C.rows() > 0) {
        const double viol = (C * delta).cwiseAbs().maxCoeff();
        max_violation = std::max(max_violation, viol);
        if (viol > 1e-10 * std::max(1.0, delta.cwiseAbs().maxCoeff())) ++max_violation_events;
      }
      Vec u = A.apply(delta) / p;
      const double eta = line_search_pth(r, u, p);
      Vec rn = r + eta * u;
      const double fn = norm_p_pow(rn, p);
      if (eta > 0.0 && fn < f) {
        x += eta * delta / p;
        r = A.apply(x) - b;
        f = std::min(fn, norm_p_pow(r, p));
        accepted = true;
      } else {
        ++rejected;
        shrink *= 1.0 + 1.0 / p;
      }
    }
    if (!accepted) {
      out.report.notes.push_back("no descent from gamma-solver step; stopping at numerical floor");
      break;
    }
  }

  out.x = x;
  out.objective = std::pow(f, 1.0 / p);
  out.lower_bound = best_lb;
  out.report.residual_lp = out.objective;
  out.report.residual_l2 = r.norm();
  out.report.dual_bound = best_lb;
  out.report.bump("solver_calls", calls);
  out.report.bump("rejected_steps", rejected);
  out.report.bump("outer_rounds", rounds);
  out.report.bump("constraint_violations", max_violation_events);
  out.report.gram_solves = ctr->gram_solves - gram0;
  out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

RefineResult refine_to_accuracy(const ProblemInstance& inst, const GammaSolverContract& solver,
                                const LinearConstraint* constraint, SolveCounter* counter,
                                const RefineOptions& options) {
  MatrixDesign design(inst.A);
  return refine_to_accuracy(design, inst.b, inst.p, inst.eps, solver, constraint, counter, options);
}

GammaSolverContract quadratic_gamma_solver(const RegressionDesign& A, SolveCounter* counter) {
  GammaSolverContract c;
  c.gamma = 1.0;
  c.solve = [&A, counter](const GammaRequest& req) {
    const Index d = A.cols();
    Mat C = req.C ? *req.C : Mat(0, d);
    Mat Cg(C.rows() + 1, d);
    Cg.topRows(C.rows()) = C;
    Cg.row(C.rows()) = req.g.transpose();
    Vec r2 = Vec::Zero(C.rows() + 1);
    r2(C.rows()) = -req.nu;
    const double rmax = std::max(req.r.maxCoeff(), 1e-300);
    return A.bordered(req.r.cwiseMax(1e-14 * rmax), Cg, Vec::Zero(d), r2, counter).x;
  };
  return c;
}

}  // namespace lpreg
