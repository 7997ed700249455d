#include "doctest.h"
#include "lpreg/accel.hpp"
#include "test_util.hpp"

#include <random>

using namespace lpreg;
using testutil::rows;
using testutil::vec;

namespace {

PnormObjective make_objective(const DenseMatrix& A, const Vec& b, double p, std::uint64_t seed = 0) {
  return PnormObjective(A, b, p, lewis_overestimates(A, p, seed).weights);
}

// Damped Newton on f_y with explicit Hessians; independent of prox_solve.
Vec newton_prox(const ProxProblem& prob) {
  const PnormObjective& f = *prob.f;
  const double p = f.p();
  const Mat Ad = f.A().entries();
  Mat M = Ad.transpose() * f.metric_weights().asDiagonal() * Ad;
  Vec x = prob.center;
  for (int it = 0; it < 200; ++it) {
    Vec g = prox_gradient(prob, x);
    Vec u = x - prob.center;
    const double mu = f.m_norm(u);
    Mat H = Ad.transpose() * f.hessian_weights(x).asDiagonal() * Ad;
    const double Cp = f.reg_coeff();
    if (p == 2.0) {
      H += 2 * Cp * M;
    } else if (mu > 0) {
      Vec Mu = M * u;
      H += p * Cp * std::pow(mu, p - 2) * M + p * (p - 2) * Cp * std::pow(mu, p - 4) * Mu * Mu.transpose();
    }
    H += 1e-14 * M;
    Vec step = H.ldlt().solve(-g);
    double t = 1.0, f0 = prox_value(prob, x);
    while (prox_value(prob, x + t * step) > f0 + 0.25 * t * g.dot(step) && t > 1e-12) t *= 0.5;
    x += t * step;
    if (std::abs(g.dot(step)) < 1e-26 * std::max(1.0, f0 * f0)) break;
  }
  return x;
}

}  // namespace

TEST_CASE("gradients match finite differences") {
  DenseMatrix A(testutil::gaussian(20, 3, 1));
  Vec b = testutil::gaussian_vec(20, 2);
  for (double p : {2.0, 3.0, 4.0, 8.0}) {
    PnormObjective f = make_objective(A, b, p);
    ProxProblem prob{&f, testutil::gaussian_vec(3, 3)};
    Vec x = testutil::gaussian_vec(3, 4);
    Vec g = f.gradient(x), gy = prox_gradient(prob, x);
    for (Index j = 0; j < 3; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
      Vec xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const double fd = (f.value(xp) - f.value(xm)) / (2 * h);
      const double fdy = (prox_value(prob, xp) - prox_value(prob, xm)) / (2 * h);
      CHECK(std::abs(fd - g(j)) <= 1e-5 * std::max(1.0, std::abs(g(j))));
      CHECK(std::abs(fdy - gy(j)) <= 1e-5 * std::max(1.0, std::abs(gy(j))));
    }
  }
}

TEST_CASE("hessian stability") {
  DenseMatrix A(testutil::gaussian(60, 5, 7));
  Vec b = testutil::gaussian_vec(60, 8);
  for (double p : {2.0, 3.0, 4.0, 8.0}) {
    PnormObjective f = make_objective(A, b, p);
    Vec y = testutil::gaussian_vec(5, 9);
    CHECK(hessian_stability_check(y, y, f, 50, 1) <= 1 + 1e-8);
    for (int k = 0; k < 5; ++k) {
      Vec u = testutil::gaussian_vec(5, 20 + k);
      u /= f.m_norm(u);
      for (double r : {0.1, 1.0, 10.0}) CHECK(hessian_stability_check(y, y + r * u, f, 200, k) <= 1 + 1e-8);
    }
  }
}

TEST_CASE("prox at a stationary center") {
  DenseMatrix A(testutil::gaussian(30, 3, 3));
  Vec y = testutil::gaussian_vec(3, 4);
  PnormObjective f = make_objective(A, A.apply(y), 4);
  ProxProblem prob{&f, y};
  ProxCertificate c = prox_solve(prob, y, 1e-10);
  CHECK(c.certified());
  CHECK(f.m_norm(c.x - y) <= std::pow(1e-10, 1.0 / 3));
}

TEST_CASE("prox at p = 2 matches the closed form") {
  DenseMatrix A(testutil::gaussian(30, 3, 5));
  Vec b = testutil::gaussian_vec(30, 6);
  PnormObjective f = make_objective(A, b, 2);
  Vec y = testutil::gaussian_vec(3, 7);
  ProxProblem prob{&f, y};
  ProxCertificate c = prox_solve(prob, y, 1e-12);
  Mat K = A.entries().transpose() * A.entries();
  Vec rhs = A.apply_t(b) + 4 * std::exp(1.0) * K * y;
  Vec x = ((1 + 4 * std::exp(1.0)) * K).ldlt().solve(rhs);
  CHECK((c.x - x).norm() <= 1e-8 * std::max(1.0, x.norm()));
}

TEST_CASE("prox on random instances") {
  for (double p : {3.0, 4.0, 8.0}) {
    DenseMatrix A(testutil::gaussian(50, 4, 11));
    Vec b = testutil::gaussian_vec(50, 12);
    PnormObjective f = make_objective(A, b, p);
    Vec y = testutil::gaussian_vec(4, 13) * 0.3;
    ProxProblem prob{&f, y};
    ProxCertificate c = prox_solve(prob, y, 1e-10);
    CHECK(c.certified());
    CHECK(c.monotone);
    CHECK(c.tau_condition <= 1e-8);
    CHECK(c.iterations <= 64 * std::exp(2.0) * std::log(1e10));
    Vec xn = newton_prox(prob);
    CHECK(prox_value(prob, c.x) <= prox_value(prob, xn) + 1e-6);
  }
}

TEST_CASE("strong convexity of the p-norm") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-3, 3);
  for (double p : {1.5, 2.0, 3.0, 4.0, 8.0}) {
    Vec y = testutil::gaussian_vec(4, 1);
    InequalitySides s = strong_convexity_sides(y, Vec::Zero(4), p);
    CHECK(s.lhs == doctest::Approx(s.rhs));
    CHECK(strong_convexity_check(Vec::Zero(4), testutil::gaussian_vec(4, 2), p));
    for (int k = 0; k < 2000; ++k) {
      Vec a(3), dlt(3);
      for (Index i = 0; i < 3; ++i) {
        a(i) = U(rng);
        dlt(i) = U(rng);
      }
      REQUIRE(strong_convexity_check(a, dlt, p));
    }
  }
}

TEST_CASE("ms and halving") {
  DenseMatrix A(testutil::gaussian(30, 3, 21));
  Vec x0 = testutil::gaussian_vec(3, 22);
  PnormObjective exact = make_objective(A, A.apply(x0), 4);
  MsResult r = ms_accelerate(exact, x0, 1e-12, 1.0);
  CHECK(r.report.counter("prox_calls") == 0);
  CHECK((r.x - x0).norm() == 0.0);

  ProblemInstance quad{DenseMatrix(testutil::gaussian(40, 3, 23)), testutil::gaussian_vec(40, 24), 2.0, 1e-10};
  RefineResult q = solve_accel(quad, 0);
  CHECK(q.report.counter("prox_calls") <= 1);
  CHECK(q.objective <= (1 + 1e-10) * q.lower_bound);

  DenseMatrix B(testutil::gaussian(60, 4, 25));
  Vec b = testutil::gaussian_vec(60, 26);
  PnormObjective f = make_objective(B, b, 4);
  ProblemInstance inst{B, b, 4.0, 1e-13};
  RefineResult best = solve_accel(inst, 0);
  const double fstar = std::pow(best.lower_bound, 4);
  Vec x = gram_solve(B, DiagonalWeights::ones(60), B.apply_t(b));
  double err = f.value(x) - fstar;
  for (int k = 0; k < 10; ++k) {
    MsResult h = halve_error(f, x, err);
    const double e_new = f.value(h.x) - fstar;
    CHECK(e_new <= err / 2 + 1e-12 * fstar);
    // distance to the minimiser against the certified error
    CHECK(f.m_norm(h.x - best.x) <= distance_bound(4, 4, e_new) + 1e-6);
    x = h.x;
    err /= 2;
  }
}

TEST_CASE("accel solve, ridge option") {
  ProblemInstance inst{DenseMatrix(testutil::gaussian(100, 6, 31)), testutil::gaussian_vec(100, 32), 4.0, 1e-8};
  RefineResult r = solve_accel(inst, 0);
  CHECK(r.objective <= (1 + 1e-8) * r.lower_bound);
  const double k = std::ceil(8 * std::pow(4.0, 2.0 / 3) * std::pow(6.0, 0.2));
  CHECK(r.report.counter("prox_calls") <= k * 40);
  std::int64_t total = 0;
  for (const auto& [ph, v] : r.report.gram_by_phase) total += v;
  CHECK(total == r.report.gram_solves);

  AccelOptions opt;
  opt.ridge = true;
  RefineResult rr = solve_accel(inst, 0, nullptr, opt);
  CHECK(rr.objective <= (1 + 1e-6) * r.objective);
}
