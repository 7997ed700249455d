#include "doctest.h"
#include "lpreg/lewis.hpp"
#include "test_util.hpp"

#include <random>

using namespace lpreg;
using testutil::rows;
using testutil::vec;

TEST_CASE("overestimate examples") {
  DenseMatrix I4(RowMat::Identity(4, 4));
  for (double p : {4.0, 2.0}) {
    LewisOverestimate w = lewis_overestimates(I4, p, 0);
    for (Index i = 0; i < 4; ++i) CHECK((w.weights(i) >= 1.35 && w.weights(i) <= 1.65));
    CHECK((w.mass >= 5.4 && w.mass <= 6.6));
  }
  DenseMatrix A(testutil::gaussian(100, 6, 17));
  LewisOverestimate w = lewis_overestimates(A, 8, 1);
  CHECK(w.mass <= 12);
  CHECK(w.mass >= 6);
  Vec sigma = leverage_scores(A, lewis_row_scale(w.weights, 8));
  CHECK(((sigma - w.weights).array() <= 1e-8).all());
}

TEST_CASE("overestimate certificate sweep") {
  for (int m = 0; m < 6; ++m) {
    DenseMatrix A(testutil::gaussian(30 + 20 * m, 2 + m, 500 + m));
    for (double p : {2.0, 3.0, 4.0, 8.0, kInf}) {
      LewisOverestimate w = lewis_overestimates(A, p, m);
      CHECK(w.mass >= A.cols());
      CHECK(w.mass <= 2 * A.cols());
      CHECK(w.max_shortfall <= 1e-8);
    }
  }
  // forcing the sketch still certifies
  DenseMatrix A(testutil::gaussian(400, 3, 77));
  LewisOverestimate w = lewis_overestimates(A, 4, 2, nullptr, SketchPolicy::Always);
  CHECK(w.max_shortfall <= 1e-8);
}

TEST_CASE("norm sandwich") {
  DenseMatrix I2(RowMat::Identity(2, 2));
  NormSandwich s = norm_sandwich_check(I2, vec({1.5, 1.5}), 4, vec({1, 0}));
  CHECK(s.lp == doctest::Approx(1));
  CHECK(s.weighted_l2 == doctest::Approx(std::pow(1.5, 0.25)));
  CHECK(s.upper == doctest::Approx(std::pow(3.0, 0.25)));
  s = norm_sandwich_check(I2, vec({1.5, 1.5}), 2, vec({3, 4}));
  CHECK(s.lp == doctest::Approx(5));
  CHECK(s.weighted_l2 == doctest::Approx(5));
  CHECK(s.upper == doctest::Approx(5));

  DenseMatrix A(testutil::gaussian(50, 5, 21));
  LewisOverestimate w = lewis_overestimates(A, 4, 0);
  for (int k = 0; k < 100; ++k) {
    NormSandwich t = norm_sandwich_check(A, w.weights, 4, testutil::gaussian_vec(5, 900 + k));
    CHECK(t.lp <= t.weighted_l2 * (1 + 1e-10));
    CHECK(t.weighted_l2 <= t.upper * (1 + 1e-10));
  }
}

TEST_CASE("potential is midpoint convex") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.05, 3.0);
  for (int m = 0; m < 5; ++m) {
    DenseMatrix A(testutil::gaussian(12, 3, 40 + m));
    for (double p : {3.0, 4.0, 8.0}) {
      for (int t = 0; t < 100; ++t) {
        Vec u(12), v(12);
        for (Index i = 0; i < 12; ++i) {
          u(i) = U(rng);
          v(i) = U(rng);
        }
        const Index i = t % 12;
        const double mid = lewis_potential(A, 0.5 * (u + v), p, i);
        CHECK(mid <= 0.5 * (lewis_potential(A, u, p, i) + lewis_potential(A, v, p, i)) + 1e-9);
      }
    }
  }
}

TEST_CASE("regularized weights") {
  Vec w = reg_lewis(DenseMatrix(RowMat::Identity(3, 3)), Vec::Zero(3), 1.5, 0).weights;
  for (Index i = 0; i < 3; ++i) CHECK((w(i) >= 0.96 && w(i) <= 1.05));
  w = reg_lewis(DenseMatrix(rows({{1}, {1}})), Vec::Zero(2), 2.0, 0).weights;
  for (Index i = 0; i < 2; ++i) CHECK(std::abs(w(i) - 0.5) <= 0.01);

  DenseMatrix A(testutil::gaussian(60, 4, 8));
  Vec c = Vec::Constant(60, 0.1);
  RegularizedLewisWeights r = reg_lewis(A, c, 1.5, 3);
  CHECK(reg_lewis_residual(A, r.weights, c, 1.5) <= 0.15);

  // q = 2: any regulariser leaves the plain leverage scores
  Vec lev = leverage_scores(A);
  r = reg_lewis(A, Vec::Constant(60, 0.7), 2.0, 1);
  CHECK((r.weights - lev).cwiseAbs().maxCoeff() <= 1e-9);

  CHECK_THROWS_AS(reg_lewis(A, c, 2.5, 0), SolverError);
  CHECK_THROWS_AS(reg_lewis(A, -c, 1.5, 0), SolverError);
}

TEST_CASE("contraction step") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    DenseMatrix A(testutil::gaussian(25, 3, 300 + t));
    const double q = 1.2 + 0.035 * t;
    Vec c = Vec::Constant(25, 0.05 * (t % 3));
    Vec w = reg_lewis_fixed_point(A, c, q);
    Vec u(25);
    for (Index i = 0; i < 25; ++i) u(i) = std::max(0.0, (w(i) + c(i)) * std::exp(U(rng)) - c(i));
    auto dist = [&](const Vec& x) {
      Vec r = (x + c).array() / (w + c).array();
      return std::max(r.maxCoeff(), 1.0 / r.minCoeff());
    };
    const double before = dist(u);
    Vec un = reg_lewis_update(A, u, c, q);
    const double after = dist(un);
    CHECK(after < before);
    CHECK(after <= std::pow(before, 1 - q / 2) * (1 + 1e-9));
  }
}

TEST_CASE("exact Lewis oracle") {
  Vec w = exact_lewis_oracle(DenseMatrix(RowMat::Identity(5, 5)), 3);
  for (Index i = 0; i < 5; ++i) CHECK(w(i) == doctest::Approx(1));
  DenseMatrix A(testutil::gaussian(40, 3, 2));
  w = exact_lewis_oracle(A, 2);
  CHECK((w - leverage_scores(A)).cwiseAbs().maxCoeff() <= 1e-9);
  w = exact_lewis_oracle(A, 3.5);
  CHECK((w - leverage_scores(A, lewis_row_scale(w, 3.5))).cwiseAbs().maxCoeff() <= 1e-9);
  // regularised weights at q = 2 agree with the p = 2 fixed point
  Vec r = reg_lewis(A, Vec::Zero(40), 2.0, 4).weights;
  CHECK((r - exact_lewis_oracle(A, 2)).cwiseAbs().maxCoeff() <= 1e-6);
}
