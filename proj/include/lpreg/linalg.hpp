#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "lpreg/errors.hpp"

namespace lpreg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// n x d design matrix with n >= d, full column rank and finite entries.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(RowMat entries, std::vector<std::string> labels = {});

  // Skips the rank check; for matrices derived from an already validated one.
  static DenseMatrix trusted(RowMat entries);

  Index rows() const { return a_.rows(); }
  Index cols() const { return a_.cols(); }
  const RowMat& entries() const { return a_; }
  const std::vector<std::string>& labels() const { return labels_; }

  Vec apply(const Vec& x) const { return a_ * x; }
  Vec apply_t(const Vec& r) const { return a_.transpose() * r; }

 private:
  RowMat a_;
  std::vector<std::string> labels_;
};

struct DiagonalWeights {
  Vec values;
  double floor = 1e-300;

  DiagonalWeights() = default;
  explicit DiagonalWeights(Vec v, double floor_value = 1e-300);
  static DiagonalWeights ones(Index n);

  Vec clamped() const { return values.cwiseMax(floor); }
};

// Counts factorizations of A^T D A. A block of right-hand sides against one
// factorization is one solve; sketch rows are tallied separately.
struct SolveCounter {
  std::int64_t gram_solves = 0;
  std::int64_t sketch_applications = 0;
  std::map<std::string, std::int64_t> by_phase;
  std::string phase = "other";

  void record_gram();
  std::int64_t phase_total() const;
  // Per-phase solves recorded since the snapshot `before` of by_phase.
  std::map<std::string, std::int64_t> phases_since(const std::map<std::string, std::int64_t>& before) const;
};

class PhaseScope {
 public:
  PhaseScope(SolveCounter* counter, std::string phase);
  ~PhaseScope();
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

 private:
  SolveCounter* counter_;
  std::string saved_;
};

// Cholesky of A^T D A with floor clamping on D and a Tikhonov retry.
class GramSystem {
 public:
  GramSystem(const DenseMatrix& A, const DiagonalWeights& D, SolveCounter* counter = nullptr);

  Vec solve(const Vec& rhs, double rtol = 1e-12) const;
  Mat solve(const Mat& rhs, double rtol = 1e-12) const;

  const Mat& gram() const { return k_; }
  double tikhonov() const { return lambda_; }
  Index dim() const { return k_.rows(); }
  // True when the factorization went through QR of D^{1/2} A instead of Cholesky.
  bool orthogonal() const { return use_qr_; }

 private:
  Vec factor_solve(const Vec& rhs) const;
  Vec residual(const Vec& x, const Vec& rhs) const;

  Mat k_;
  double lambda_ = 0.0;
  Eigen::LLT<Mat> llt_;
  bool use_qr_ = false;
  RowMat b_;  // D^{1/2} A, kept for the QR path
  Mat r_;     // its triangular factor
};

Vec gram_solve(const DenseMatrix& A, const DiagonalWeights& D, const Vec& rhs,
               SolveCounter* counter = nullptr, double rtol = 1e-12);

// ||A^T D A x - rhs|| / ||rhs||, evaluated in extended precision.
double gram_residual(const DenseMatrix& A, const DiagonalWeights& D, const Vec& x, const Vec& rhs);

struct BorderedSolution {
  Vec x;
  Vec multipliers;
};

// Solves [A^T D A, C^T; C, 0] [x; mu] = [r1; r2] through one factorization
// and a k x k Schur complement on the constraint rows of C.
BorderedSolution bordered_solve(const DenseMatrix& A, const DiagonalWeights& D, const Mat& C,
                                const Vec& r1, const Vec& r2, SolveCounter* counter = nullptr);

Vec leverage_scores(const DenseMatrix& A, SolveCounter* counter = nullptr);
// Leverage scores of diag(row_scale) * A.
Vec leverage_scores(const DenseMatrix& A, const Vec& row_scale, SolveCounter* counter = nullptr);

enum class SketchPolicy {
  Auto,    // sketch only when it has fewer rows than A
  Always,
  Never,
};

Index sketch_rows(Index n, double eps);

Vec approx_lev(const DenseMatrix& A, double eps, std::uint64_t seed, SolveCounter* counter = nullptr,
               SketchPolicy policy = SketchPolicy::Auto);
Vec approx_lev(const DenseMatrix& A, const Vec& row_scale, double eps, std::uint64_t seed,
               SolveCounter* counter = nullptr, SketchPolicy policy = SketchPolicy::Auto);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

double norm_p(const Vec& x, double p);
double norm_p_pow(const Vec& x, double p);
bool all_finite(const Vec& x);

DenseMatrix read_matrix(const std::string& path);
Vec read_vector(const std::string& path);
void write_matrix(const std::string& path, const DenseMatrix& A);
void write_vector(const std::string& path, const Vec& v);

}  // namespace lpreg
