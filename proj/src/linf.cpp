#include "lpreg/linf.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace lpreg {

LseValue lse_eval(const Vec& u, double t) {
  if (!(t > 0.0)) fail(ErrorKind::InvalidInput, "temperature must be positive");
  if (u.size() == 0) fail(ErrorKind::InvalidInput, "lse of an empty vector");
  const double m = u.maxCoeff();
  Vec e = ((u.array() - m) / t).exp().matrix();
  const double s = e.sum();
  LseValue out;
  out.value = m + t * std::log(s);
  out.gradient = e / s;
  return out;
}

LseObjective::LseObjective(const DenseMatrix& A, Vec b, double t, bool symmetric)
    : a_(A), b_(std::move(b)), t_(t), symmetric_(symmetric) {
  if (!(t > 0.0)) fail(ErrorKind::InvalidInput, "temperature must be positive");
  if (b_.size() != A.rows()) fail(ErrorKind::InvalidInput, "rhs length does not match rows");
}

Vec LseObjective::lifted(const Vec& r) const {
  if (!symmetric_) return r;
  Vec s(2 * r.size());
  s << r, -r;
  return s;
}

double LseObjective::value(const Vec& x) const { return lse_eval(lifted(a_.apply(x) - b_), t_).value; }

Vec LseObjective::softmax(const Vec& x) const { return lse_eval(lifted(a_.apply(x) - b_), t_).gradient; }

Vec LseObjective::row_weights(const Vec& x) const {
  Vec pi = softmax(x);
  if (!symmetric_) return pi;
  const Index n = a_.rows();
  return pi.head(n) - pi.tail(n);
}

Vec LseObjective::gradient(const Vec& x) const { return a_.apply_t(row_weights(x)); }

double LseObjective::hessian_form(const Vec& x, const Vec& u) const {
  Vec pi = lse_eval(lifted(a_.apply(x) - b_), t_).gradient;
  Vec s = lifted(a_.apply(u));
  const double mean = pi.dot(s);
  const double second = pi.dot(s.cwiseProduct(s));
  return std::max(0.0, second - mean * mean) / t_;
}

QscReport qsc_check(const LseObjective& f, const Vec& w, const Vec& x, int directions, std::uint64_t seed) {
  const DenseMatrix& A = f.A();
  const Index d = A.cols();
  const double t = f.t();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  auto mnorm = [&](const Vec& u) { return std::sqrt((w.array() * A.apply(u).array().square()).sum()); };
  QscReport rep;
  for (int k = 0; k < directions; ++k) {
    Vec u(d), h(d);
    for (Index j = 0; j < d; ++j) u(j) = N(rng);
    for (Index j = 0; j < d; ++j) h(j) = N(rng);
    const double q = f.hessian_form(x, u);
    const double mu = mnorm(u), mh = mnorm(h);
    if (mu > 0.0) rep.smooth_ratio = std::max(rep.smooth_ratio, q / (mu * mu / t));
    const double ah = A.apply(h).cwiseAbs().maxCoeff();
    if (ah > 0.0) {
      const double step = 1e-4 * t / ah;
      const double d3 = (f.hessian_form(x + step * h, u) - f.hessian_form(x - step * h, u)) / (2.0 * step);
      const double bound = 2.0 / t * q * mh;
      if (bound > 0.0)
        rep.qsc_ratio = std::max(rep.qsc_ratio, std::abs(d3) / bound);
      else if (std::abs(d3) > 1e-10 * mu * mu / (t * t))
        rep.qsc_ratio = kInf;
    }
    ++rep.samples;
  }
  return rep;
}

double linf_certificate(const DenseMatrix& A, const Vec& b, const Vec& y, SolveCounter* counter) {
  Vec z = gram_solve(A, DiagonalWeights::ones(A.rows()), A.apply_t(y), counter);
  Vec yp = y - A.apply(z);
  const double den = yp.cwiseAbs().sum();
  if (!(den > 0.0)) return 0.0;
  return std::abs(b.dot(yp)) / den;
}

RefineResult linf_regress(const DenseMatrix& A, const Vec& b, double eps, std::uint64_t seed, SolveCounter* counter,
                          const LinfOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(eps > 0.0 && eps < 1.0)) fail(ErrorKind::InvalidInput, "eps must lie in (0, 1)");
  const Index n = A.rows(), d = A.cols();
  if (b.size() != n) fail(ErrorKind::InvalidInput, "rhs length does not match rows");
  if (!b.allFinite()) fail(ErrorKind::NonFinite, "rhs is not finite");
  SolveCounter local;
  SolveCounter* ctr = counter ? counter : &local;
  const std::int64_t gram0 = ctr->gram_solves, sketch0 = ctr->sketch_applications;
  const auto phases0 = ctr->by_phase;

  RefineResult out;
  out.report.method = "linf";
  out.report.p = kInf;
  out.report.eps = eps;
  out.report.n = n;
  out.report.d = d;
  out.report.seed = seed;

  Vec w;
  {
    PhaseScope ps(ctr, "lewis");
    w = lewis_overestimates(A, kInf, seed, ctr).weights.cwiseMax(kWeightFloor);
  }
  Vec x;
  {
    PhaseScope ps(ctr, "warm_start");
    x = gram_solve(A, DiagonalWeights::ones(n), A.apply_t(b), ctr);
  }
  Vec r = A.apply(x) - b;
  double ub = r.cwiseAbs().maxCoeff();
  Vec best = x;
  double lb = 0.0;
  const double bscale = std::max(1.0, b.cwiseAbs().maxCoeff());
  const double logm = std::log(2.0 * static_cast<double>(n));
  std::int64_t stages = 0, newton = 0, rejected = 0, halvings = 0;

  if (ub > 1e-14 * bscale) {
    {
      PhaseScope ps(ctr, "certificate");
      lb = linf_certificate(A, b, r, ctr);
    }
    if (lb > 0.0) out.report.notes.push_back("warm start upper/lower ratio " + std::to_string(ub / lb));
    double hi = ub;
    double t = ub / logm;
    double lambda = 1.0;
    bool certified = ub <= (1.0 + eps) * lb;
    while (!certified && stages < options.max_stages) {
      ++stages;
      const double t_target = eps * std::max(lb, 0.5 * ub) / (20.0 * logm);
      t = std::max(t / 8.0, t_target);
      if (stages > 1 && t == t_target && ub > (1.0 + eps) * lb) t = std::max(t_target / 4.0, t / 4.0);
      LseObjective f(A, b, t);
      PhaseScope ps(ctr, "newton");
      double fx = f.value(x);
      // Levenberg-damped Newton in the Lewis metric; the damping keeps steps
      // inside the region where the Hessian is stable.
      for (int it = 0; it < options.max_newton; ++it) {
        Vec lifted_pi = f.softmax(x);
        Vec mass = lifted_pi.head(n) + lifted_pi.tail(n);
        Vec sigma = lifted_pi.head(n) - lifted_pi.tail(n);
        Vec g = A.apply_t(sigma);
        Vec D = (mass + lambda * w) / t;
        Vec a = gram_solve(A, DiagonalWeights(D), g, ctr);
        const double ga = g.dot(a);
        const double denom = t - ga;
        Vec step = denom > 0.0 ? Vec(-a * (t / denom)) : Vec(-a);
        const double lin = g.dot(step);
        const double pred = -(lin + 0.5 * f.hessian_form(x, step));
        if (!(pred > 0.0) || pred <= 1e-3 * eps * t) break;
        const double fn = f.value(x + step);
        if (fx - fn >= 0.1 * pred) {
          x += step;
          fx = fn;
          lambda = std::max(lambda / 3.0, 1e-12);
          ++newton;
        } else {
          lambda *= 4.0;
          ++rejected;
          if (lambda > 1e14) break;
        }
      }
      r = A.apply(x) - b;
      const double cur = r.cwiseAbs().maxCoeff();
      if (cur < ub) {
        ub = cur;
        best = x;
      }
      if (ub <= 0.5 * hi) {
        ++halvings;
        hi = ub;
      }
      {
        PhaseScope pc(ctr, "certificate");
        lb = std::max(lb, linf_certificate(A, b, f.row_weights(x), ctr));
      }
      certified = ub <= (1.0 + eps) * lb;
    }
    if (!certified) fail(ErrorKind::BudgetExceeded, "linf stages exhausted before certification");
  }

  out.x = best;
  out.objective = ub;
  out.lower_bound = lb;
  out.report.residual_lp = ub;
  out.report.residual_l2 = (A.apply(best) - b).norm();
  out.report.dual_bound = lb;
  out.report.bump("stages", stages);
  out.report.bump("newton_steps", newton);
  out.report.bump("rejected_steps", rejected);
  out.report.bump("halvings", halvings);
  out.report.gram_solves = ctr->gram_solves - gram0;
  out.report.sketch_applications = ctr->sketch_applications - sketch0;
  out.report.gram_by_phase = ctr->phases_since(phases0);
  out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace lpreg
