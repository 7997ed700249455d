#include "doctest.h"
#include "lpreg/refinement.hpp"
#include "test_util.hpp"

using namespace lpreg;
using testutil::rows;
using testutil::vec;

TEST_CASE("bregman terms") {
  BregmanTerms t = bregman_terms(Vec::Zero(2), 4);
  CHECK(t.g.cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.r.cwiseAbs().maxCoeff() == 0.0);
  t = bregman_terms(vec({1, -2}), 4);
  CHECK(t.g(0) == doctest::Approx(4));
  CHECK(t.g(1) == doctest::Approx(-32));
  CHECK(t.r(1) == doctest::Approx(4));
  t = bregman_terms(vec({3}), 3);
  CHECK(t.g(0) == doctest::Approx(27));
  CHECK(t.r(0) == doctest::Approx(3));
}

TEST_CASE("scalar refine bounds") {
  ScalarBounds s = scalar_refine_bounds(1, 0, 4);
  CHECK(s.lower == 0.0);
  CHECK(s.actual == 0.0);
  CHECK(s.upper == 0.0);
  s = scalar_refine_bounds(0, 1, 2);
  CHECK(s.actual == doctest::Approx(1));
  CHECK(s.lower == doctest::Approx(0.25 + 0.125));
  // 2 p^2 r + p^p with r = |0|^0 = 1
  CHECK(s.upper == doctest::Approx(12));
  for (double p : {2.0, 2.5, 3.0, 4.0, 8.0})
    for (int i = -300; i <= 300; ++i)
      for (int j = -300; j <= 300; j += 3) {
        ScalarBounds b = scalar_refine_bounds(i * 0.01, j * 0.01, p);
        const double slack = 1e-12 * (std::abs(b.actual) + std::abs(b.upper)) + 1e-12;
        REQUIRE(b.lower <= b.actual + slack);
        REQUIRE(b.actual <= b.upper + slack);
      }
}

TEST_CASE("power inequalities") {
  for (double k : {2.0, 3.0, 4.0, 7.5, 10.0})
    for (int i = 0; i <= 500; i += 2)
      for (int j = 0; j <= 500; j += 2) REQUIRE(power_gap_bound(i * 0.01, j * 0.01, k).holds());
  for (double k : {1.0, 1.3, 2.0, 5.0})
    for (int i = 0; i <= 500; i += 2)
      for (int j = 0; j <= 500; j += 2) REQUIRE(power_gap_bound4(i * 0.01, j * 0.01, k).holds());
  for (double p : {2.5, 3.0, 4.0, 8.0})
    for (int i = -400; i <= 400; i += 4)
      for (int j = -400; j <= 400; j += 4) REQUIRE(shifted_power_bound(i * 0.01, j * 0.01, p).holds());
  for (double a = 1.05; a <= 4.0; a += 0.15)
    for (double m : {1.0, 2.0, 3.5, 6.0})
      for (int i = -20; i <= 20; ++i)
        for (int j = -20; j <= 20; ++j) REQUIRE(split_power_bound(i * 0.2, j * 0.2, m, a).holds());
}

TEST_CASE("refinement with the quadratic solver") {
  DenseMatrix A(rows({{1}, {2}}));
  MatrixDesign design(A);
  GammaSolverContract quad = quadratic_gamma_solver(design, nullptr);
  RefineResult r = refine_to_accuracy(design, vec({3, 6}), 4, 1e-6, quad);
  CHECK(r.x(0) == doctest::Approx(3));
  CHECK(r.objective <= 1e-12);

  DenseMatrix B(rows({{1}, {1}}));
  MatrixDesign d2(B);
  GammaSolverContract q2 = quadratic_gamma_solver(d2, nullptr);
  r = refine_to_accuracy(d2, vec({0, 2}), 4, 1e-8, q2);
  CHECK(r.x(0) == doctest::Approx(1).epsilon(1e-8));
  CHECK(r.objective == doctest::Approx(std::pow(2.0, 0.25)));
  CHECK(r.objective <= (1 + 1e-8) * r.lower_bound);

  r = refine_to_accuracy(d2, Vec::Zero(2), 4, 1e-8, q2);
  CHECK(r.x(0) == 0.0);
}

TEST_CASE("refinement random instance, monotone and constrained") {
  DenseMatrix A(testutil::gaussian(80, 5, 1));
  Vec b = testutil::gaussian_vec(80, 2);
  MatrixDesign design(A);
  SolveCounter c;
  GammaSolverContract quad = quadratic_gamma_solver(design, &c);
  RefineResult r = refine_to_accuracy(design, b, 4, 1e-6, quad, nullptr, &c);
  CHECK(r.objective <= (1 + 1e-6) * r.lower_bound);
  CHECK(r.report.gram_solves == c.gram_solves);

  LinearConstraint con{Mat::Ones(1, 5), vec({1.0})};
  r = refine_to_accuracy(design, b, 3, 1e-6, quad, &con, &c);
  CHECK(std::abs(r.x.sum() - 1.0) <= 1e-10);
  CHECK(r.objective <= (1 + 1e-6) * r.lower_bound);
}

TEST_CASE("certify gamma") {
  DenseMatrix A(RowMat::Identity(2, 2));
  MatrixDesign design(A);
  GammaRequest req;
  req.g = vec({-1, 0});
  req.r = Vec::Ones(2);
  GammaCertificate c = certify_gamma(design, req, vec({1, 0}), 4);
  CHECK(c.linear == doctest::Approx(-1));
  CHECK(c.quadratic == doctest::Approx(1));
  CHECK(c.pth == doctest::Approx(1));
  CHECK(c.within(1, 4, 1));
}
