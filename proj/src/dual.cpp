#include "lpreg/dual.hpp"

#include <chrono>
#include <cmath>
#include <memory>

namespace lpreg {

RowMat DualInstance::stacked() const {
  RowMat U(rows(), cols());
  U.leftCols(A->cols()) = A->entries();
  U.rightCols(extra.cols()) = extra;
  return U;
}

DualInstance dual_reduce(const DenseMatrix& A, const Vec& b, double q, SolveCounter* counter) {
  if (!(q > 1.0 && q <= 2.0)) fail(ErrorKind::InvalidInput, "dual path needs q in (1, 2]");
  const Index n = A.rows(), d = A.cols();
  if (b.size() != n) fail(ErrorKind::InvalidInput, "rhs length does not match rows");
  if (!b.allFinite()) fail(ErrorKind::NonFinite, "rhs is not finite");
  Vec x = gram_solve(A, DiagonalWeights::ones(n), A.apply_t(b), counter);
  const double res = (A.apply(x) - b).norm();
  if (!(res > 1e-13 * b.norm())) fail(ErrorKind::Infeasible, "rhs lies in the column space; residual is zero");
  DualInstance inst;
  inst.A = &A;
  inst.extra = b;
  inst.v = Vec::Zero(d + 1);
  inst.v(d) = 1.0;
  inst.R = Vec::Zero(n);
  inst.p = dual_exponent(q);
  return inst;
}

Vec stacked_min_energy(const DualInstance& inst, const Vec& D, SolveCounter* counter) {
  const DenseMatrix& A = *inst.A;
  const Index n = A.rows(), d = A.cols(), k = inst.extra.cols();
  if (D.size() != n || inst.v.size() != d + k) fail(ErrorKind::InvalidInput, "stacked system size mismatch");
  if (!D.allFinite()) fail(ErrorKind::NonFinite, "stacked weights not finite");
  const double dmax = D.maxCoeff();
  if (!(dmax > 0.0)) fail(ErrorKind::SingularGram, "stacked weights vanish");
  Vec E = D.cwiseMax(1e-14 * dmax).cwiseInverse();
  const Mat& X = inst.extra;

  GramSystem sys(A, DiagonalWeights(E), counter);
  Mat B12 = A.entries().transpose() * (E.asDiagonal() * X);
  Mat B22 = X.transpose() * E.asDiagonal() * X;
  Mat KB = sys.solve(B12);
  // from the weighted residual of X on A; B22 - B12^T KB cancels badly once X
  // is nearly in range(A)
  Mat Xr = X - A.entries() * KB;
  Mat S = Xr.transpose() * E.asDiagonal() * Xr;
  // unit-diagonal rescaling so the rank test does not depend on column scale
  Vec cs = B22.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  Mat Sn = cs.asDiagonal() * S * cs.asDiagonal();
  Eigen::ColPivHouseholderQR<Mat> sqr(Sn);
  if (k > 0 && (sqr.rank() < k || std::abs(sqr.matrixR()(k - 1, k - 1)) <= 1e-13))
    fail(ErrorKind::Infeasible, "extra columns lie in the column space of A");
  auto solve_z = [&](const Vec& rhs, Vec& z1, Vec& z2) {
    Vec k1 = sys.solve(Vec(rhs.head(d)));
    z2 = k > 0 ? Vec(cs.asDiagonal() * sqr.solve(Vec(cs.asDiagonal() * (rhs.tail(k) - B12.transpose() * k1)))) : Vec(0);
    z1 = k1 - KB * z2;
  };
  auto assemble = [&](const Vec& z1, const Vec& z2) {
    Vec uz = A.apply(z1);
    if (k > 0) uz += X * z2;
    return Vec(E.cwiseProduct(uz));
  };
  auto constraint_residual = [&](const Vec& y) {
    Vec r(d + k);
    r.head(d) = A.apply_t(y);
    if (k > 0) r.tail(k) = X.transpose() * y;
    return Vec(inst.v - r);
  };

  Vec z1, z2;
  solve_z(inst.v, z1, z2);
  Vec y = assemble(z1, z2);
  // two correction sweeps against the same factorisation
  for (int it = 0; it < 2; ++it) {
    Vec res = constraint_residual(y);
    if (res.cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, inst.v.cwiseAbs().maxCoeff())) break;
    Vec c1, c2;
    solve_z(res, c1, c2);
    z1 += c1;
    if (k > 0) z2 += c2;
    y = assemble(z1, z2);
  }
  return y;
}

SmallOracleResult oracle_small(const DualInstance& inst, std::uint64_t seed, SolveCounter* counter) {
  const double p = inst.p;
  const Index n = inst.rows();
  if (!(p >= 2.0) || std::isinf(p)) fail(ErrorKind::InvalidInput, "dual exponent must be finite and >= 2");
  if (inst.R.size() != n) fail(ErrorKind::InvalidInput, "resistance length does not match rows");
  if ((inst.R.array() < 0.0).any()) fail(ErrorKind::InvalidInput, "resistances must be nonnegative");
  const double du = static_cast<double>(inst.cols());
  SmallOracleResult out;
  if (p == 2.0) {
    out.weights = Vec::Ones(n);
    out.D = inst.R + Vec::Ones(n);
  } else {
    const double q = p / (p - 1.0);
    Vec c = du * inst.R.array().pow(p / (p - 2.0)).matrix();
    DenseMatrix U = DenseMatrix::trusted(inst.stacked());
    {
      PhaseScope ps(counter, "lewis");
      out.weights = reg_lewis(U, c, q, seed, counter).weights;
    }
    out.D = std::pow(du, 1.0 - 2.0 / p) * inst.R +
            out.weights.cwiseMax(kWeightFloor).array().pow(1.0 - 2.0 / p).matrix();
  }
  out.y = stacked_min_energy(inst, out.D, counter);
  return out;
}

PrimalRecovery primal_recover(const DenseMatrix& A, const Vec& b, const Vec& y_dual, double p,
                              SolveCounter* counter) {
  const Index n = A.rows();
  if (y_dual.size() != n || b.size() != n) fail(ErrorKind::InvalidInput, "dual vector length does not match rows");
  const double q = p / (p - 1.0);
  Vec s = y_dual.cwiseAbs().array().pow(p - 1.0).matrix().cwiseProduct(y_dual.cwiseSign());
  GramSystem sys(A, DiagonalWeights::ones(n), counter);
  Mat rhs(A.cols(), 2);
  rhs.col(0) = A.apply_t(b);
  rhs.col(1) = A.apply_t(s);
  Mat xs = sys.solve(rhs);
  Vec x0 = xs.col(0), x1 = xs.col(1);
  Vec r0 = A.apply(x0) - b, r1 = A.apply(x1) - s;
  // residual of x(lambda) = x0 + lambda x1 is r0 + lambda (r1 + s)
  Vec dir = r1 + s;
  auto objective = [&](double lam) { return norm_p(r0 + lam * dir, q); };

  PrimalRecovery out;
  const double ypp = norm_p_pow(y_dual, p);
  if (!(dir.cwiseAbs().maxCoeff() > 0.0) || !(ypp > 0.0)) {
    out.x = x0;
    out.objective = objective(0.0);
    return out;
  }
  // optimal lambda is -|b^T y| / ||y||_p^p up to the sign convention of y
  double L = 4.0 * std::max(std::abs(b.dot(y_dual)), 1e-300) / ypp;
  for (int grow = 0; grow < 60; ++grow) {
    const double fl = objective(-L), fr = objective(L), fm = objective(0.0);
    const double inner = std::min(objective(-0.5 * L), objective(0.5 * L));
    if (std::min(fm, inner) < std::min(fl, fr)) break;
    L *= 4.0;
  }
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = -L, hi = L;
  double a = hi - phi * (hi - lo), c = lo + phi * (hi - lo);
  double fa = objective(a), fc = objective(c);
  while (hi - lo > 1e-13 * L) {
    if (fa <= fc) {
      hi = c;
      c = a;
      fc = fa;
      a = hi - phi * (hi - lo);
      fa = objective(a);
    } else {
      lo = a;
      a = c;
      fa = fc;
      c = lo + phi * (hi - lo);
      fc = objective(c);
    }
  }
  out.lambda = fa <= fc ? a : c;
  out.x = x0 + out.lambda * x1;
  out.objective = norm_p(A.apply(out.x) - b, q);
  const double f0 = objective(0.0);
  if (f0 < out.objective) {
    out.lambda = 0.0;
    out.x = x0;
    out.objective = f0;
  }
  return out;
}

double dual_certificate(const DenseMatrix& A, const Vec& b, const Vec& y, double p, SolveCounter* counter) {
  Vec z = gram_solve(A, DiagonalWeights::ones(A.rows()), A.apply_t(y), counter);
  Vec yp = y - A.apply(z);
  const double den = norm_p(yp, p);
  if (!(den > 0.0)) return 0.0;
  return std::abs(b.dot(yp)) / den;
}

GammaSolverContract small_gamma_solver(const DenseMatrix& A, const Vec& b, double p, std::uint64_t seed,
                                       SolveCounter* counter) {
  const double du = static_cast<double>(A.cols() + 2);
  GammaSolverContract c;
  c.gamma = 4.0 * std::pow(du, (p - 2.0) / (2.0 * p - 2.0));
  auto calls = std::make_shared<std::uint64_t>(0);
  c.solve = [&A, b, p, seed, counter, calls](const GammaRequest& req) {
    const Index n = A.rows(), d = A.cols();
    if (!(req.nu > 0.0)) fail(ErrorKind::InvalidInput, "gamma request needs nu > 0");
    // witness of value <= opt_bound rescaled to quadratic and p-th power terms at most one
    const double ub = std::max(req.opt_bound, 1e-300);
    const double beta = std::pow(ub, 1.0 / p);
    DualInstance inst;
    inst.A = &A;
    inst.extra = Mat(n, 2);
    inst.extra.col(0) = b;
    inst.extra.col(1) = req.g * (beta / req.nu);
    inst.v = Vec::Zero(d + 2);
    inst.v(d + 1) = -1.0;
    inst.R = req.r * (beta * beta / ub);
    inst.p = p;
    try {
      Vec y = oracle_small(inst, derive_seed(seed, (*calls)++), counter).y;
      return Vec(beta * y);
    } catch (const SolverError& e) {
      // g numerically in span[A b]: no descent direction left at this precision
      if (e.kind() != ErrorKind::Infeasible) throw;
      return Vec(Vec::Zero(n));
    }
  };
  return c;
}

RefineResult solve_dual(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter) {
  const auto t0 = std::chrono::steady_clock::now();
  const double q = inst.p;
  if (!(q > 1.0 && q <= 2.0)) fail(ErrorKind::InvalidInput, "dual path needs q in (1, 2]");
  if (!(inst.eps > 0.0)) fail(ErrorKind::InvalidInput, "eps must be positive");
  const DenseMatrix& A = inst.A;
  const Vec& b = inst.b;
  const Index n = A.rows(), d = A.cols();
  if (b.size() != n) fail(ErrorKind::InvalidInput, "rhs length does not match rows");
  if (!b.allFinite()) fail(ErrorKind::NonFinite, "rhs is not finite");
  SolveCounter local;
  SolveCounter* ctr = counter ? counter : &local;
  const std::int64_t gram0 = ctr->gram_solves, sketch0 = ctr->sketch_applications;
  const auto phases0 = ctr->by_phase;
  const double p = dual_exponent(q);

  RefineResult out;
  bool degenerate = false;
  {
    PhaseScope ps(ctr, "warm_start");
    try {
      dual_reduce(A, b, q, ctr);
    } catch (const SolverError& e) {
      if (e.kind() != ErrorKind::Infeasible) throw;
      degenerate = true;
    }
  }
  if (degenerate) {
    out.x = gram_solve(A, DiagonalWeights::ones(n), A.apply_t(b), ctr);
    out.objective = norm_p(A.apply(out.x) - b, q);
    out.lower_bound = 0.0;
    out.report.notes.push_back("rhs in column space; l2 solution is exact");
  } else {
    Mat C(d + 1, n);
    C.topRows(d) = A.entries().transpose();
    C.row(d) = b.transpose();
    LinearConstraint con{C, Vec::Zero(d + 1)};
    con.v(d) = 1.0;
    IdentityDesign design(n);
    GammaSolverContract solver = small_gamma_solver(A, b, p, seed, ctr);
    // the primal error after recovery is roughly quadratic in the dual error;
    // tighten and rerun when the certified gap is still above eps
    double dual_eps = std::min(inst.eps, 1e-4);
    PrimalRecovery rec;
    std::int64_t attempts = 0;
    for (;;) {
      ++attempts;
      RefineResult dual = refine_to_accuracy(design, Vec::Zero(n), p, dual_eps, solver, &con, ctr);
      out.report = dual.report;
      PhaseScope ps(ctr, "recovery");
      rec = primal_recover(A, b, dual.x, p, ctr);
      out.lower_bound = dual_certificate(A, b, dual.x, p, ctr);
      if (rec.objective <= (1.0 + inst.eps) * out.lower_bound || dual_eps < 1e-14) break;
      dual_eps *= 1e-3;
    }
    out.report.bump("dual_attempts", attempts);
    if (rec.objective > (1.0 + inst.eps) * out.lower_bound)
      out.report.notes.push_back("recovered primal still above (1+eps) times the certified bound");
    out.x = rec.x;
    out.objective = rec.objective;
  }
  out.report.method = "dual";
  out.report.p = q;
  out.report.eps = inst.eps;
  out.report.n = n;
  out.report.d = d;
  out.report.seed = seed;
  Vec r = A.apply(out.x) - b;
  out.report.residual_lp = out.objective;
  out.report.residual_l2 = r.norm();
  out.report.dual_bound = out.lower_bound;
  out.report.gram_solves = ctr->gram_solves - gram0;
  out.report.sketch_applications = ctr->sketch_applications - sketch0;
  out.report.gram_by_phase = ctr->phases_since(phases0);
  out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace lpreg
