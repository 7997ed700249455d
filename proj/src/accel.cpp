#include "lpreg/accel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace lpreg {

namespace {

constexpr double kE = 2.718281828459045;

Vec signed_pow(const Vec& r, double k) {
  // |r|^k sign(r)
  return (r.cwiseAbs().array().pow(k) * r.array().sign()).matrix();
}

}  // namespace

PnormObjective::PnormObjective(const DenseMatrix& A, Vec b, double p, Vec lewis_weights, double ridge)
    : a_(A), b_(std::move(b)), p_(p), ridge_(ridge) {
  if (!(p >= 2.0) || std::isinf(p)) fail(ErrorKind::InvalidInput, "accel needs finite p >= 2");
  if (b_.size() != A.rows() || lewis_weights.size() != A.rows())
    fail(ErrorKind::InvalidInput, "row vector length mismatch");
  mw_ = lewis_weights.cwiseMax(kWeightFloor).array().pow(1.0 - 2.0 / p).matrix();
}

double PnormObjective::reg_coeff() const { return kE * std::pow(p_, p_); }

double PnormObjective::value(const Vec& x) const {
  double v = norm_p_pow(residual(x), p_);
  if (ridge_ > 0.0) v += ridge_ * std::pow(m_norm(x), 2);
  return v;
}

Vec PnormObjective::gradient(const Vec& x) const {
  Vec g = p_ * a_.apply_t(signed_pow(residual(x), p_ - 1.0));
  if (ridge_ > 0.0) g += 2.0 * ridge_ * m_apply(x);
  return g;
}

Vec PnormObjective::hessian_weights(const Vec& x) const {
  return p_ * (p_ - 1.0) * residual(x).cwiseAbs().array().pow(p_ - 2.0).matrix();
}

double PnormObjective::m_norm(const Vec& u) const {
  Vec au = a_.apply(u);
  return std::sqrt((mw_.array() * au.array().square()).sum());
}

Vec PnormObjective::m_apply(const Vec& u) const { return a_.apply_t(mw_.cwiseProduct(a_.apply(u))); }

Vec PnormObjective::m_solve(const Vec& v, SolveCounter* counter) const {
  return gram_solve(a_, DiagonalWeights(mw_), v, counter);
}

double PnormObjective::m_inv_norm(const Vec& v, SolveCounter* counter) const {
  return std::sqrt(std::max(0.0, v.dot(m_solve(v, counter))));
}

double prox_value(const ProxProblem& prob, const Vec& x) {
  const PnormObjective& f = *prob.f;
  return f.value(x) + f.reg_coeff() * std::pow(f.m_norm(x - prob.center), f.p());
}

Vec prox_gradient(const ProxProblem& prob, const Vec& x) {
  const PnormObjective& f = *prob.f;
  const double p = f.p();
  Vec u = x - prob.center;
  const double mu = f.m_norm(u);
  Vec g = f.gradient(x);
  if (mu > 0.0) g += p * f.reg_coeff() * std::pow(mu, p - 2.0) * f.m_apply(u);
  return g;
}

namespace {

// Regularizer of the relative-smoothness scheme around the center y:
// h(x) = 1/2 (x-y)^T A^T H A (x-y) + C_p ||x-y||_M^p + ridge ||x||_M^2.
struct ProxRegularizer {
  const PnormObjective& f;
  const Vec& y;
  Vec H;

  double value(const Vec& x) const {
    Vec u = x - y;
    Vec au = f.A().apply(u);
    double v = 0.5 * (H.array() * au.array().square()).sum() + f.reg_coeff() * std::pow(f.m_norm(u), f.p());
    if (f.ridge() > 0.0) v += f.ridge() * std::pow(f.m_norm(x), 2);
    return v;
  }

  Vec gradient(const Vec& x) const {
    const double p = f.p();
    Vec u = x - y;
    Vec g = f.A().apply_t(H.cwiseProduct(f.A().apply(u)));
    const double mu = f.m_norm(u);
    if (mu > 0.0) g += p * f.reg_coeff() * std::pow(mu, p - 2.0) * f.m_apply(u);
    if (f.ridge() > 0.0) g += 2.0 * f.ridge() * f.m_apply(x);
    return g;
  }
};

struct SubproblemResult {
  Vec u;
  double tau = 1.0;
  double condition = 0.0;
};

// argmin_u <c, u> + L h(y + u). For fixed tau the minimiser is one Gram solve;
// the optimal tau solves tau = ||u(tau)||_M^{p-2}.
SubproblemResult solve_subproblem(const ProxRegularizer& h, const Vec& c, double L, double tau_guess,
                                  SolveCounter* counter, int max_doublings, int& probes) {
  const PnormObjective& f = h.f;
  const double p = f.p();
  const double Cp = f.reg_coeff();
  Vec rhs = -c;
  if (f.ridge() > 0.0) rhs -= 2.0 * L * f.ridge() * f.m_apply(h.y);
  SubproblemResult out;
  if (rhs.cwiseAbs().maxCoeff() == 0.0) {
    out.u = Vec::Zero(c.size());
    out.tau = 0.0;
    return out;
  }
  auto solve_at = [&](double tau) {
    ++probes;
    Vec D = L * h.H + L * (2.0 * f.ridge() + Cp * p * tau) * f.metric_weights();
    return gram_solve(f.A(), DiagonalWeights(D), rhs, counter);
  };
  if (p == 2.0) {
    out.u = solve_at(1.0);
    return out;
  }
  // psi(t) = (p-2) log ||u(e^t)||_M - t is strictly decreasing.
  auto psi = [&](double t, Vec& u) {
    u = solve_at(std::exp(t));
    const double mu = f.m_norm(u);
    if (!(mu > 0.0)) return -std::numeric_limits<double>::infinity();
    return (p - 2.0) * std::log(mu) - t;
  };
  double t0 = std::log(tau_guess > 0.0 && std::isfinite(tau_guess) ? tau_guess : 1.0);
  Vec u0;
  double s0 = psi(t0, u0);
  if (std::abs(s0) <= 1e-12) {
    out.u = u0;
    out.tau = std::exp(t0);
    return out;
  }
  const double dir = s0 > 0.0 ? 1.0 : -1.0;
  double step = std::log(2.0);
  double t1 = t0, s1 = s0;
  Vec u1;
  int doublings = 0;
  while (true) {
    if (++doublings > max_doublings) fail(ErrorKind::BisectionStall, "could not bracket tau");
    t1 = t0 + dir * step;
    s1 = psi(t1, u1);
    if ((s1 > 0.0) != (s0 > 0.0) || s1 == 0.0) break;
    t0 = t1;
    s0 = s1;
    u0 = u1;
    step *= 2.0;
  }
  // Illinois iteration on [lo, hi] with psi(lo) > 0 > psi(hi).
  double lo = t0, hi = t1, flo = s0, fhi = s1;
  Vec ulo = u0, uhi = u1;
  if (lo > hi) {
    std::swap(lo, hi);
    std::swap(flo, fhi);
    std::swap(ulo, uhi);
  }
  int side = 0;
  Vec best = std::abs(flo) < std::abs(fhi) ? ulo : uhi;
  double best_t = std::abs(flo) < std::abs(fhi) ? lo : hi;
  double best_f = std::min(std::abs(flo), std::abs(fhi));
  for (int it = 0; it < 200 && best_f > 1e-12 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    double t = std::isfinite(flo) && std::isfinite(fhi) ? (lo * fhi - hi * flo) / (fhi - flo) : 0.5 * (lo + hi);
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    Vec u;
    const double ft = psi(t, u);
    if (std::abs(ft) < best_f) {
      best_f = std::abs(ft);
      best = u;
      best_t = t;
    }
    if (ft > 0.0) {
      lo = t;
      flo = ft;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = t;
      fhi = ft;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  out.u = best;
  out.tau = std::exp(best_t);
  const double mu = f.m_norm(best);
  out.condition = std::abs(std::pow(out.tau, 2.0 / (p - 2.0)) - mu * mu) / std::max(mu * mu, 1e-300);
  return out;
}

}  // namespace

ProxCertificate prox_solve(const ProxProblem& prob, const Vec& x0, double tol, SolveCounter* counter,
                           const ProxOptions& options) {
  if (!prob.f) fail(ErrorKind::InvalidInput, "prox problem without an objective");
  if (!(tol > 0.0)) fail(ErrorKind::InvalidInput, "prox tolerance must be positive");
  const PnormObjective& f = *prob.f;
  const double p = f.p();
  const Vec& y = prob.center;
  ProxRegularizer h{f, y, f.hessian_weights(y)};

  ProxCertificate cert;
  cert.alpha = 1.0 / (128.0 * p * p);
  cert.delta = tol;
  const double lead = kE * cert.alpha * std::pow(p, p + 1.0);

  Vec x = x0;
  double fx = prox_value(prob, x);
  double L = 1.0;
  double tau = std::max(std::pow(f.m_norm(x - y), p - 2.0), 1e-300);
  for (int it = 0;; ++it) {
    Vec gx = prox_gradient(prob, x);
    cert.residual = f.m_inv_norm(gx, counter);
    cert.threshold = lead * std::pow(f.m_norm(x - y), p - 1.0) + tol;
    cert.x = x;
    cert.iterations = it;
    if (cert.residual <= cert.threshold || it >= options.max_iterations) return cert;

    Vec ghx = h.gradient(x);
    const double hx = h.value(x);
    Vec xn;
    double fn = 0.0;
    while (true) {
      SubproblemResult sub = solve_subproblem(h, gx - L * ghx, L, tau, counter, options.max_doublings, cert.probes);
      xn = y + sub.u;
      if (sub.tau > 0.0) tau = sub.tau;
      cert.last_tau = sub.tau;
      cert.tau_condition = sub.condition;
      fn = prox_value(prob, xn);
      const double model = fx + gx.dot(xn - x) + L * (h.value(xn) - hx - ghx.dot(xn - x));
      if (fn <= model + 1e-12 * std::abs(fx) || L >= kE) break;
      L = std::min(kE, L * std::sqrt(kE));
    }
    if (fn > fx + 1e-12 * std::abs(fx)) cert.monotone = false;
    if (fn >= fx && (xn - x).norm() <= 1e-15 * std::max(1.0, x.norm())) {
      // stalled at floating-point resolution
      cert.x = x;
      cert.iterations = it + 1;
      return cert;
    }
    x = xn;
    fx = fn;
    L = std::max(1.0, L / std::sqrt(kE));
  }
}

double hessian_stability_check(const Vec& y, const Vec& x, const PnormObjective& f, int samples, std::uint64_t seed) {
  const double p = f.p();
  const double Cp = f.reg_coeff();
  const DenseMatrix& A = f.A();
  Vec hx = f.hessian_weights(x);
  Vec hy = f.hessian_weights(y);
  Vec u = x - y;
  const double mu = f.m_norm(u);
  Vec mu_vec = f.m_apply(u);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    Vec z(A.cols());
    for (Index j = 0; j < z.size(); ++j) z(j) = nd(rng);
    Vec az = A.apply(z);
    const double mz2 = std::pow(f.m_norm(z), 2);
    double reg = 0.0;
    if (mu > 0.0) {
      reg = p * Cp * std::pow(mu, p - 2.0) * mz2;
      if (p > 2.0) reg += p * (p - 2.0) * Cp * std::pow(mu, p - 4.0) * std::pow(mu_vec.dot(z), 2);
    } else if (p == 2.0) {
      reg = 2.0 * Cp * mz2;
    }
    const double ridge = 2.0 * f.ridge() * mz2;
    const double qf = (hx.array() * az.array().square()).sum() + reg + ridge;
    const double qh = (hy.array() * az.array().square()).sum() + reg + ridge;
    if (qf <= 0.0 && qh <= 0.0) continue;
    worst = std::max(worst, qh / (kE * std::max(qf, 1e-300)));
    worst = std::max(worst, qf / (kE * std::max(qh, 1e-300)));
  }
  return worst;
}

InequalitySides strong_convexity_sides(const Vec& y, const Vec& delta, double p) {
  Vec v = p * signed_pow(y, p - 1.0);
  const double lhs = norm_p_pow(y, p) + v.dot(delta) + (p - 1.0) / (p * std::pow(2.0, p)) * norm_p_pow(delta, p);
  return {lhs, norm_p_pow(y + delta, p)};
}

bool strong_convexity_check(const Vec& y, const Vec& delta, double p) {
  return strong_convexity_sides(y, delta, p).holds(1e-12);
}

double distance_bound(Index d, double p, double err) {
  return std::pow(2.0, 1.5) * std::pow(static_cast<double>(d), 0.5 - 1.0 / p) * std::pow(std::max(err, 0.0), 1.0 / p);
}

namespace {

double lp_lower_bound(const PnormObjective& f, const Vec& x, SolveCounter* counter) {
  MatrixDesign design(f.A());
  PhaseScope ps(counter, "certificate");
  return dual_lower_bound(design, f.b(), f.p(), f.residual(x), nullptr, counter);
}

}  // namespace

MsResult ms_accelerate(const PnormObjective& f, const Vec& x0, double eps, double dist_bound, SolveCounter* counter,
                       const MsOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveCounter local;
  SolveCounter* ctr = counter ? counter : &local;
  const std::int64_t gram0 = ctr->gram_solves;
  const double p = f.p();
  const Index d = f.A().cols();
  const double R = std::max(dist_bound, 1e-300);

  MsResult out;
  out.report.method = "ms";
  out.report.p = p;
  out.report.eps = eps;
  out.report.n = f.A().rows();
  out.report.d = d;

  long long budget = options.budget;
  if (budget <= 0) {
    const double k = std::ceil(8.0 * std::pow(p, 2.0 / 3.0) * std::pow(static_cast<double>(d), (p - 2.0) / (3.0 * p - 2.0)));
    const double lg = 6.0 + std::log2(std::max(2.0, 1e20 * std::pow(R, p) * std::pow(1e5 * p, p + 6.0) / std::max(eps, 1e-300)));
    budget = static_cast<long long>(std::min(1e12, std::ceil(k * lg * lg)));
  }
  const double f0 = norm_p_pow(f.residual(x0), p);
  const double gscale = p * std::pow(std::max(f0, 1e-300), 1.0 - 1.0 / p);
  const double delta = std::max(eps / (1e20 * p * p * R), 1e-13 * gscale);
  const double lead = kE * std::pow(p, p + 1.0);
  auto omega = [&](double r) { return lead * std::pow(r, p - 2.0); };

  Vec x = x0, v = x0, best = x0;
  double best_f = f0;
  double Ak = 0.0;
  double lam = 1.0 / omega(R);
  long long prox_calls = 0, ms_steps = 0, inner = 0, probes = 0, exhausted = 0, non_monotone = 0;

  auto run_prox = [&](const Vec& center) {
    if (++prox_calls > budget) fail(ErrorKind::BudgetExceeded, "prox-call budget exceeded");
    PhaseScope ps(ctr, "prox");
    ProxProblem prob{&f, center};
    ProxCertificate c = prox_solve(prob, center, delta, ctr);
    inner += c.iterations;
    probes += c.probes;
    if (!c.monotone) ++non_monotone;
    return c;
  };

  double lb = 0.0;
  while (true) {
    lb = std::max(lb, lp_lower_bound(f, best, ctr));
    const double obj = std::pow(best_f, 1.0 / p);
    if (best_f - std::pow(lb, p) <= eps) break;
    if (options.stop_ratio > 0.0 && obj <= (1.0 + options.stop_ratio) * lb) break;
    if (obj <= 1e-14 * std::max(1.0, f.b().cwiseAbs().maxCoeff())) break;

    struct Trial {
      double a = 0.0;
      Vec xt;
      ProxCertificate cert;
      double val = 0.0;
    };
    auto trial = [&](double l) {
      Trial t;
      t.a = 0.5 * (l + std::sqrt(l * l + 4.0 * l * Ak));
      t.xt = (Ak * x + t.a * v) / (Ak + t.a);
      t.cert = run_prox(t.xt);
      t.val = l * omega(f.m_norm(t.cert.x - t.xt));
      return t;
    };

    Trial acc;
    const bool fixed_center = Ak == 0.0 || (x - v).norm() == 0.0;
    if (p == 2.0) {
      // omega is constant, so the step-size condition holds exactly.
      lam = 1.0 / omega(1.0);
      acc = trial(lam);
    } else if (fixed_center) {
      // the prox center does not move with lambda; read lambda off the step
      acc = trial(lam);
      const double step = f.m_norm(acc.cert.x - acc.xt);
      if (!(step > 0.0)) break;
      lam = 1.0 / omega(step);
      acc.a = 0.5 * (lam + std::sqrt(lam * lam + 4.0 * lam * Ak));
    } else {
      acc = trial(lam);
      double lo = 0.0, hi = 0.0;
      int depth = 1;
      while (!(acc.val >= 0.5 && acc.val <= 2.0) && depth < options.max_bisection) {
        if (acc.val < 0.5)
          lo = lam;
        else
          hi = lam;
        if (lo > 0.0 && hi > 0.0)
          lam = std::sqrt(lo * hi);
        else if (lo > 0.0)
          lam *= 4.0;
        else
          lam /= 4.0;
        acc = trial(lam);
        ++depth;
      }
      if (!(acc.val >= 0.5 && acc.val <= 2.0)) ++exhausted;
    }
    Ak += acc.a;
    Vec y = acc.cert.x;
    {
      PhaseScope ps(ctr, "ms");
      v -= acc.a * f.m_solve(f.gradient(y), ctr);
    }
    x = y;
    ++ms_steps;
    const double fy = norm_p_pow(f.residual(y), p);
    if (fy < best_f) {
      best_f = fy;
      best = y;
    }
  }

  out.x = best;
  out.value = std::pow(best_f, 1.0 / p);
  out.lower_bound = lb;
  out.report.residual_lp = out.value;
  out.report.dual_bound = lb;
  out.report.bump("prox_calls", prox_calls);
  out.report.bump("ms_steps", ms_steps);
  out.report.bump("inner_iterations", inner);
  out.report.bump("tau_probes", probes);
  out.report.bump("bisection_exhausted", exhausted);
  out.report.bump("non_monotone_prox", non_monotone);
  out.report.gram_solves = ctr->gram_solves - gram0;
  out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

MsResult halve_error(const PnormObjective& f, const Vec& x0, double err, SolveCounter* counter,
                     const MsOptions& options) {
  return ms_accelerate(f, x0, 0.5 * err, distance_bound(f.A().cols(), f.p(), err), counter, options);
}

RefineResult solve_accel(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter,
                         const AccelOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const double p = inst.p;
  if (!(p >= 2.0) || std::isinf(p)) fail(ErrorKind::InvalidInput, "accel needs finite p >= 2");
  if (!(inst.eps > 0.0)) fail(ErrorKind::InvalidInput, "eps must be positive");
  const DenseMatrix& A = inst.A;
  if (inst.b.size() != A.rows()) fail(ErrorKind::InvalidInput, "rhs length does not match rows");
  if (!inst.b.allFinite()) fail(ErrorKind::NonFinite, "rhs is not finite");
  SolveCounter local;
  SolveCounter* ctr = counter ? counter : &local;
  const std::int64_t gram0 = ctr->gram_solves, sketch0 = ctr->sketch_applications;
  const auto phases0 = ctr->by_phase;

  RefineResult out;
  out.report.method = "accel";
  out.report.p = p;
  out.report.eps = inst.eps;
  out.report.n = A.rows();
  out.report.d = A.cols();
  out.report.seed = seed;

  Vec w;
  {
    PhaseScope ps(ctr, "lewis");
    w = lewis_overestimates(A, p, seed, ctr).weights;
  }
  PnormObjective f(A, inst.b, p, w, options.ridge ? options.ridge_coeff : 0.0);
  Vec x = Vec::Zero(A.cols());
  if (inst.b.cwiseAbs().maxCoeff() > 0.0) {
    PhaseScope ps(ctr, "warm_start");
    x = gram_solve(A, DiagonalWeights::ones(A.rows()), A.apply_t(inst.b), ctr);
  }
  const double bscale = std::max(inst.b.cwiseAbs().maxCoeff(), 1e-300);
  double lb = 0.0;
  long long halvings = 0;
  for (; halvings <= options.max_halvings; ++halvings) {
    const double obj = norm_p(f.residual(x), p);
    lb = std::max(lb, lp_lower_bound(f, x, ctr));
    if (obj <= (1.0 + inst.eps) * lb || obj <= 1e-14 * bscale) break;
    const double err = std::pow(obj, p) - std::pow(lb, p);
    MsOptions ms;
    ms.stop_ratio = inst.eps;
    MsResult r = halve_error(f, x, err, ctr, ms);
    for (const auto& [k, v] : r.report.counters) out.report.bump(k, v);
    lb = std::max(lb, r.lower_bound);
    x = r.x;
  }
  out.x = x;
  out.objective = norm_p(f.residual(x), p);
  out.lower_bound = lb;
  out.report.bump("halvings", halvings);
  out.report.residual_lp = out.objective;
  out.report.residual_l2 = f.residual(x).norm();
  out.report.dual_bound = lb;
  out.report.gram_solves = ctr->gram_solves - gram0;
  out.report.sketch_applications = ctr->sketch_applications - sketch0;
  out.report.gram_by_phase = ctr->phases_since(phases0);
  out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace lpreg
