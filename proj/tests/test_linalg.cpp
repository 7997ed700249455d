#include "doctest.h"

#include <filesystem>

#include "test_util.hpp"

using namespace lpreg;
using testutil::rows;
using testutil::vec;

TEST_CASE("gram_solve examples") {
  DenseMatrix I2(RowMat::Identity(2, 2));
  SolveCounter c;
  Vec x = gram_solve(I2, DiagonalWeights::ones(2), vec({3, 4}), &c);
  CHECK(x(0) == doctest::Approx(3));
  CHECK(x(1) == doctest::Approx(4));
  CHECK(c.gram_solves == 1);

  DenseMatrix A(rows({{1, 0}, {0, 1}, {1, 1}}));
  x = gram_solve(A, DiagonalWeights::ones(3), vec({1, 0}));
  CHECK(x(0) == doctest::Approx(2.0 / 3));
  CHECK(x(1) == doctest::Approx(-1.0 / 3));

  x = gram_solve(I2, DiagonalWeights(vec({2, 5})), vec({2, 5}));
  CHECK(x(0) == doctest::Approx(1));
  CHECK(x(1) == doctest::Approx(1));
}

TEST_CASE("gram_solve residual and errors") {
  DenseMatrix A(testutil::gaussian(40, 6, 3));
  Vec D = testutil::gaussian_vec(40, 4).cwiseAbs();
  Vec rhs = testutil::gaussian_vec(6, 5);
  DiagonalWeights dw(D);
  Vec x = gram_solve(A, dw, rhs);
  CHECK(gram_residual(A, dw, x, rhs) <= 1e-12);

  Vec bad = rhs;
  bad(0) = std::nan("");
  CHECK_THROWS_AS(gram_solve(A, dw, bad), SolverError);
  CHECK_THROWS_AS(DenseMatrix(rows({{1, 2}, {2, 4}, {3, 6}})), SolverError);
  CHECK_THROWS_AS(DenseMatrix(rows({{1, 2}})), SolverError);
}

TEST_CASE("leverage score examples") {
  Vec s = leverage_scores(DenseMatrix(RowMat::Identity(3, 3)));
  for (Index i = 0; i < 3; ++i) CHECK(s(i) == doctest::Approx(1));
  s = leverage_scores(DenseMatrix(rows({{1}, {1}})));
  CHECK(s(0) == doctest::Approx(0.5));
  s = leverage_scores(DenseMatrix(rows({{1, 0}, {0, 1}, {1, 1}})));
  for (Index i = 0; i < 3; ++i) CHECK(s(i) == doctest::Approx(2.0 / 3));
}

TEST_CASE("leverage scores bound row energy") {
  DenseMatrix A(testutil::gaussian(30, 4, 9));
  Vec s = leverage_scores(A);
  CHECK(s.sum() == doctest::Approx(4).epsilon(1e-8));
  for (int k = 0; k < 200; ++k) {
    Vec ax = A.apply(testutil::gaussian_vec(4, 100 + k));
    Vec ratio = ax.array().square() / ax.squaredNorm();
    CHECK(((ratio - s).array() <= 1e-10).all());
  }
  // The maximiser for row i is (A^T A)^{-1} a_i.
  Mat K = A.entries().transpose() * A.entries();
  Vec ai = A.entries().row(0).transpose();
  Vec ax = A.apply(K.ldlt().solve(ai));
  CHECK(ax(0) * ax(0) / ax.squaredNorm() >= 0.9 * s(0));
}

TEST_CASE("approx_lev sandwich") {
  for (double eps : {0.1}) {
    Vec w = approx_lev(DenseMatrix(RowMat::Identity(4, 4)), eps, 0);
    for (Index i = 0; i < 4; ++i) CHECK((w(i) >= 1 / 1.1 && w(i) <= 1 / 0.9));
    w = approx_lev(DenseMatrix(rows({{1}, {1}})), eps, 0, nullptr, SketchPolicy::Always);
    for (Index i = 0; i < 2; ++i) CHECK((w(i) >= 0.4545 && w(i) <= 0.5556));
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (int m = 0; m < 4; ++m) {
      const Index n = 50 + 40 * m, d = 3 + 4 * m;
      DenseMatrix A(testutil::gaussian(n, d, 1000 * seed + m));
      Vec exact = leverage_scores(A);
      SolveCounter c;
      Vec w = approx_lev(A, 0.1, seed, &c, SketchPolicy::Always);
      CHECK(c.gram_solves == 1);
      CHECK(c.sketch_applications == sketch_rows(n, 0.1));
      for (Index i = 0; i < n; ++i) {
        CHECK(0.9 * w(i) <= exact(i) + 1e-12);
        CHECK(exact(i) <= 1.1 * w(i) + 1e-12);
      }
    }
  }
}

TEST_CASE("norms and io") {
  CHECK(norm_p(vec({3, 4}), 2) == doctest::Approx(5));
  CHECK(norm_p(vec({3, -4}), kInf) == doctest::Approx(4));
  CHECK(norm_p_pow(vec({1, -2}), 4) == doctest::Approx(17));
  RowMat m = testutil::gaussian(5, 2, 1);
  const std::string path = (std::filesystem::temp_directory_path() / "lpreg_io_matrix.txt").string();
  write_matrix(path, DenseMatrix(m));
  DenseMatrix back = read_matrix(path);
  CHECK((back.entries() - m).cwiseAbs().maxCoeff() == 0.0);
  const std::string vpath = (std::filesystem::temp_directory_path() / "lpreg_io_vector.txt").string();
  Vec v = testutil::gaussian_vec(7, 2);
  write_vector(vpath, v);
  CHECK((read_vector(vpath) - v).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
  std::filesystem::remove(vpath);
  CHECK_THROWS_AS(read_matrix("does_not_exist.txt"), SolverError);
}
