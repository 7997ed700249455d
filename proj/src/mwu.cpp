#include "lpreg/mwu.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

namespace lpreg {

namespace {

double tol_for(double v) { return 1e-9 * std::max(1.0, std::abs(v)); }

void check_p(double p) {
  if (!(p >= 2.0) || std::isinf(p)) fail(ErrorKind::InvalidInput, "mwu needs finite p >= 2");
  if (p > kMaxMwuP) fail(ErrorKind::InvalidInput, "mwu is capped at p = 16; use accel or linf");
}

}  // namespace

EnergySolution energy_solve(const DenseMatrix& A, const DiagonalWeights& D, const Vec& g, SolveCounter* counter,
                            const Mat* C) {
  const Index d = A.cols();
  if (g.size() != d) fail(ErrorKind::InvalidInput, "gradient length does not match columns");
  if (!g.allFinite()) fail(ErrorKind::NonFinite, "gradient is not finite");
  if (g.cwiseAbs().maxCoeff() == 0.0) fail(ErrorKind::ZeroGradient, "energy solve with zero gradient");
  EnergySolution out;
  if (!C || C->rows() == 0) {
    GramSystem sys(A, D, counter);
    Vec bg = sys.solve(g);
    const double q = g.dot(bg);
    if (!(q > 0.0)) fail(ErrorKind::SingularGram, "g^T B^{-1} g is not positive");
    out.z = -bg / q;
  } else {
    Mat Cg(C->rows() + 1, d);
    Cg.topRows(C->rows()) = *C;
    Cg.row(C->rows()) = g.transpose();
    Vec r2 = Vec::Zero(C->rows() + 1);
    r2(C->rows()) = -1.0;
    out.z = bordered_solve(A, D, Cg, Vec::Zero(d), r2, counter).x;
  }
  Vec az = A.apply(out.z);
  out.value = (D.clamped().array() * az.array().square()).sum();
  return out;
}

MwuConstants MwuConstants::make(double p, Index d) {
  const double dd = static_cast<double>(d);
  MwuConstants k;
  k.p = p;
  k.kappa = p * std::pow(dd, 1.0 / p);
  k.alpha = std::pow(dd, -(p * p - 5.0 * p + 2.0) / (p * (3.0 * p - 2.0))) / (1000.0 * p);
  k.tau = std::pow(40.0, p) * std::pow(dd, (p - 2.0) * (p - 1.0) / (3.0 * p - 2.0));
  k.rounds = static_cast<long long>(std::floor(std::pow(dd, 1.0 / p) / k.alpha));
  k.boost_cap =
      static_cast<long long>(std::ceil(32.0 * std::pow(20.0 * k.kappa, p - 2.0) / std::pow(k.tau, 2.0 / p))) + 8;
  return k;
}

MwuContext::MwuContext(const ResidualInstance& inst, Vec lewis_weights, SolveCounter* counter,
                       std::optional<MwuConstants> constants)
    : inst_(inst), w_(std::move(lewis_weights)), counter_(counter) {
  if (!inst_.A) fail(ErrorKind::InvalidInput, "residual instance without a matrix");
  check_p(inst_.p);
  const Index n = inst_.A->rows(), d = inst_.A->cols();
  if (inst_.R.size() != n || w_.size() != n) fail(ErrorKind::InvalidInput, "row vector length mismatch");
  if (inst_.g.size() != d) fail(ErrorKind::InvalidInput, "gradient length does not match columns");
  if ((inst_.R.array() < 0.0).any()) fail(ErrorKind::InvalidInput, "resistances must be nonnegative");
  k_ = constants ? *constants : MwuConstants::make(inst_.p, d);
  dscale_ = std::pow(static_cast<double>(d), 1.0 - 2.0 / inst_.p);
}

Vec MwuContext::resistances(const Vec& s) const {
  return dscale_ * inst_.R + s.array().pow(inst_.p - 2.0).matrix();
}

void MwuContext::refresh(MwuState& st) const {
  EnergySolution e = energy_solve(*inst_.A, DiagonalWeights(resistances(st.s)), inst_.g, counter_, inst_.C);
  st.z = std::move(e.z);
  st.energy = e.value;
  st.az = inst_.A->apply(st.z);
  st.az_pth = norm_p_pow(st.az, inst_.p);
  st.phi = norm_p_pow(st.s, inst_.p);
}

MwuState MwuContext::initial() const {
  MwuState st;
  st.s = w_.cwiseMax(kWeightFloor).array().pow(1.0 / inst_.p).matrix();
  st.y = Vec::Zero(inst_.A->cols());
  refresh(st);
  return st;
}

double MwuContext::witness_energy_bound(const MwuState& st) const {
  return 2.0 * std::pow(st.phi, 1.0 - 2.0 / inst_.p);
}

Index boosting_step(const MwuContext& ctx, MwuState& st) {
  const MwuConstants& k = ctx.constants();
  const double p = k.p;
  const double cut = std::pow(2.0, -p / (p - 2.0)) * k.kappa;
  const double scale = std::pow(k.tau, 2.0 / p) / (4.0 * st.az_pth);
  Vec s_new = st.s;
  double gain_floor = 0.0;  // half of sum v_i (Az)_i^2
  Index count = 0;
  for (Index i = 0; i < st.s.size(); ++i) {
    const double a = std::abs(st.az(i));
    if (st.s(i) <= cut * a) {
      const double v = scale * std::pow(a, p - 2.0);
      s_new(i) = std::pow(std::pow(st.s(i), p - 2.0) + v, 1.0 / (p - 2.0));
      gain_floor += 0.5 * v * a * a;
      ++count;
    }
  }
  if (count == 0) return 0;
  const double phi0 = st.phi, e0 = st.energy;
  const bool hypothesis = ctx.has_witness() &&
                          std::pow(2.0, p) * std::pow(k.kappa, -(p - 2.0)) * std::pow(phi0, 1.0 - 2.0 / p) <= k.tau / 4.0;
  st.s = s_new;
  ++st.boost_steps;
  ctx.refresh(st);
  const double de = st.energy - e0, dphi = st.phi - phi0;
  if (de < gain_floor / kAssertSlack - tol_for(st.energy))
    fail(ErrorKind::EnergyIncreaseViolation, "boost raised the energy by less than the weighted gain floor");
  if (hypothesis) {
    if (de < std::pow(k.tau, 2.0 / p) / 16.0 / kAssertSlack - tol_for(st.energy))
      fail(ErrorKind::EnergyIncreaseViolation, "boost raised the energy by less than tau^{2/p}/16");
    if (dphi > kAssertSlack * 20.0 * k.kappa * k.kappa * de + tol_for(st.phi))
      fail(ErrorKind::EnergyIncreaseViolation, "boost raised Phi by more than 20 kappa^2 times the energy gain");
  }
  return count;
}

void progress_step(const MwuContext& ctx, MwuState& st) {
  const MwuConstants& k = ctx.constants();
  const double p = k.p;
  if (k.alpha == 0.0 || st.az.cwiseAbs().maxCoeff() == 0.0) {
    ++st.progress_steps;
    return;
  }
  const double phi0 = st.phi, e0 = st.energy;
  st.y += k.alpha * st.z;
  st.s += k.alpha * st.az.cwiseAbs();
  ++st.progress_steps;
  ctx.refresh(st);
  const double dphi = st.phi - phi0;
  const double tail = 3.0 * std::pow(p * k.alpha, p) * k.tau;
  if (st.energy < e0 - tol_for(e0)) fail(ErrorKind::PotentialViolation, "energy decreased on a progress step");
  if (dphi > kAssertSlack * (3.0 * p * k.alpha * std::sqrt(phi0 * e0) + tail) + tol_for(phi0))
    fail(ErrorKind::PotentialViolation, "progress step raised Phi beyond the Cauchy-Schwarz bound");
  if (ctx.has_witness() &&
      dphi > kAssertSlack * (5.0 * p * k.alpha * std::pow(phi0, 1.0 - 1.0 / p) + tail) + tol_for(phi0))
    fail(ErrorKind::PotentialViolation, "progress step raised Phi beyond 5 p alpha Phi^{1-1/p}");
}

OracleResult width_reduced_oracle(const ResidualInstance& inst, std::uint64_t seed, SolveCounter* counter,
                                  const LewisOverestimate* weights) {
  const auto t0 = std::chrono::steady_clock::now();
  check_p(inst.p);
  if (!inst.A) fail(ErrorKind::InvalidInput, "residual instance without a matrix");
  SolveCounter local;
  SolveCounter* ctr = counter ? counter : &local;
  const std::int64_t gram0 = ctr->gram_solves;
  const DenseMatrix& A = *inst.A;
  const double p = inst.p;

  OracleResult out;
  out.report.method = "mwu_oracle";
  out.report.p = p;
  out.report.n = A.rows();
  out.report.d = A.cols();
  out.report.seed = seed;

  auto finish = [&](Vec y) {
    out.y = std::move(y);
    Vec ay = A.apply(out.y);
    out.lp_norm = norm_p(ay, p);
    out.quadratic = (inst.R.array() * ay.array().square()).sum();
    out.report.gram_solves = ctr->gram_solves - gram0;
    out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  };

  if (p == 2.0) {
    // S^{p-2} = I, so every iterate solves the same system.
    PhaseScope ps(ctr, "progress");
    EnergySolution e = energy_solve(A, DiagonalWeights(inst.R + Vec::Ones(A.rows())), inst.g, ctr, inst.C);
    out.report.bump("progress_steps");
    out.final_phi = static_cast<double>(A.rows());
    return finish(e.z);
  }

  LewisOverestimate local_w;
  if (!weights) {
    PhaseScope ps(ctr, "lewis");
    local_w = lewis_overestimates(A, p, seed, ctr);
    weights = &local_w;
  }
  MwuContext ctx(inst, weights->weights, ctr);
  const MwuConstants& k = ctx.constants();
  MwuState st;
  {
    PhaseScope ps(ctr, "progress");
    st = ctx.initial();
  }
  for (long long t = 0; t <= k.rounds; ++t) {
    if (ctx.has_witness() && st.energy > kAssertSlack * ctx.witness_energy_bound(st) + tol_for(st.energy))
      fail(ErrorKind::PotentialViolation, "energy exceeds 2 Phi^{1-2/p} despite a witness");
    while (st.az_pth >= k.tau) {
      if (st.boost_steps >= k.boost_cap) fail(ErrorKind::BoostBudgetExceeded, "boost-step budget exhausted");
      PhaseScope ps(ctr, "boost");
      if (boosting_step(ctx, st) == 0) fail(ErrorKind::BoostBudgetExceeded, "empty boost set with large ||Az||_p");
    }
    PhaseScope ps(ctr, "progress");
    progress_step(ctx, st);
  }
  out.final_phi = st.phi;
  if (ctx.has_witness() && st.phi > kAssertSlack * std::pow(20.0 * k.kappa, p) + tol_for(st.phi))
    fail(ErrorKind::PotentialViolation, "final Phi exceeds (20 kappa)^p");
  out.report.bump("progress_steps", st.progress_steps);
  out.report.bump("boost_steps", st.boost_steps);
  // g^T y = -alpha * steps; normalise to g^T y = -1.
  return finish(st.y / (k.alpha * static_cast<double>(st.progress_steps)));
}

namespace {

struct ScaledRequest {
  double beta = 1.0;
  ResidualInstance inst;
};

ScaledRequest scale_request(const DenseMatrix& A, const GammaRequest& req, double p) {
  if (!(req.nu > 0.0) || !(req.opt_bound > 0.0)) fail(ErrorKind::InvalidInput, "gamma request needs nu, bound > 0");
  ScaledRequest s;
  s.beta = std::pow(req.opt_bound, 1.0 / p);
  s.inst.A = &A;
  s.inst.p = p;
  s.inst.g = req.g * (s.beta / req.nu);
  s.inst.R = req.r * (s.beta * s.beta / req.opt_bound);
  s.inst.C = req.C;
  if (req.witness) s.inst.witness = *req.witness / s.beta;
  return s;
}

}  // namespace

GammaSolverContract mwu_gamma_solver(const DenseMatrix& A, double p, std::uint64_t seed, SolveCounter* counter,
                                     SolveReport* tally) {
  check_p(p);
  auto weights = std::make_shared<LewisOverestimate>();
  if (p > 2.0) {
    PhaseScope ps(counter, "lewis");
    *weights = lewis_overestimates(A, p, seed, counter);
  }
  GammaSolverContract c;
  c.gamma = std::pow(80.0 * p, p);
  c.solve = [&A, p, seed, counter, tally, weights](const GammaRequest& req) {
    ScaledRequest s = scale_request(A, req, p);
    OracleResult r = width_reduced_oracle(s.inst, seed, counter, p > 2.0 ? weights.get() : nullptr);
    if (tally) {
      tally->bump("progress_steps", r.report.counter("progress_steps"));
      tally->bump("boost_steps", r.report.counter("boost_steps"));
    }
    return Vec(s.beta * r.y);
  };
  return c;
}

GammaSolverContract single_shot_gamma_solver(const DenseMatrix& A, double p, std::uint64_t seed,
                                             SolveCounter* counter) {
  check_p(p);
  auto weights = std::make_shared<Vec>(Vec::Ones(A.rows()));
  if (p > 2.0) {
    PhaseScope ps(counter, "lewis");
    *weights = lewis_overestimates(A, p, seed, counter).weights;
  }
  GammaSolverContract c;
  c.gamma = std::pow(80.0 * p, p);
  c.solve = [&A, p, counter, weights](const GammaRequest& req) {
    ScaledRequest s = scale_request(A, req, p);
    s.inst.witness.reset();
    PhaseScope ps(counter, "progress");
    MwuContext ctx(s.inst, *weights, counter);
    return Vec(s.beta * ctx.initial().z);
  };
  return c;
}

namespace {

template <class MakeSolver>
RefineResult run_refinement(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter, const char* method,
                            MakeSolver make) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveCounter local;
  SolveCounter* ctr = counter ? counter : &local;
  const std::int64_t gram0 = ctr->gram_solves, sketch0 = ctr->sketch_applications;
  const auto phases0 = ctr->by_phase;
  SolveReport tally;
  MatrixDesign design(inst.A);
  GammaSolverContract solver = make(inst.A, inst.p, seed, ctr, &tally);
  RefineResult r = refine_to_accuracy(design, inst.b, inst.p, inst.eps, solver, nullptr, ctr);
  r.report.method = method;
  r.report.seed = seed;
  for (const auto& [k, v] : tally.counters) r.report.bump(k, v);
  r.report.gram_solves = ctr->gram_solves - gram0;
  r.report.sketch_applications = ctr->sketch_applications - sketch0;
  r.report.gram_by_phase = ctr->phases_since(phases0);
  r.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

RefineResult solve_mwu(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter) {
  return run_refinement(inst, seed, counter, "mwu", [](const DenseMatrix& A, double p, std::uint64_t s,
                                                       SolveCounter* c, SolveReport* t) {
    return mwu_gamma_solver(A, p, s, c, t);
  });
}

RefineResult solve_refine(const ProblemInstance& inst, std::uint64_t seed, SolveCounter* counter) {
  return run_refinement(inst, seed, counter, "refine", [](const DenseMatrix& A, double p, std::uint64_t s,
                                                          SolveCounter* c, SolveReport*) {
    return single_shot_gamma_solver(A, p, s, c);
  });
}

}  // namespace lpreg
