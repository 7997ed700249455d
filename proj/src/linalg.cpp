#include "lpreg/linalg.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace lpreg {

DenseMatrix::DenseMatrix(RowMat entries, std::vector<std::string> labels)
    : a_(std::move(entries)), labels_(std::move(labels)) {
  if (a_.rows() == 0 || a_.cols() == 0) fail(ErrorKind::InvalidInput, "empty matrix");
  if (a_.rows() < a_.cols()) fail(ErrorKind::InvalidInput, "matrix must have n >= d");
  if (!a_.allFinite()) fail(ErrorKind::NonFinite, "matrix has non-finite entries");
  if (!labels_.empty() && static_cast<Index>(labels_.size()) != a_.rows())
    fail(ErrorKind::InvalidInput, "row label count does not match rows");
  Eigen::ColPivHouseholderQR<Mat> qr(a_);
  if (qr.rank() < a_.cols()) fail(ErrorKind::RankDeficient, "matrix is not full column rank");
}

DenseMatrix DenseMatrix::trusted(RowMat entries) {
  DenseMatrix m;
  m.a_ = std::move(entries);
  return m;
}

DiagonalWeights::DiagonalWeights(Vec v, double floor_value) : values(std::move(v)), floor(floor_value) {
  if (!values.allFinite()) fail(ErrorKind::NonFinite, "diagonal weights are not finite");
  if ((values.array() < 0.0).any()) fail(ErrorKind::InvalidInput, "diagonal weights must be nonnegative");
}

DiagonalWeights DiagonalWeights::ones(Index n) { return DiagonalWeights(Vec::Ones(n)); }

void SolveCounter::record_gram() {
  ++gram_solves;
  ++by_phase[phase];
}

std::int64_t SolveCounter::phase_total() const {
  std::int64_t t = 0;
  for (const auto& kv : by_phase) t += kv.second;
  return t;
}

std::map<std::string, std::int64_t> SolveCounter::phases_since(
    const std::map<std::string, std::int64_t>& before) const {
  std::map<std::string, std::int64_t> out;
  for (const auto& [k, v] : by_phase) {
    auto it = before.find(k);
    const std::int64_t d = v - (it == before.end() ? 0 : it->second);
    if (d != 0) out[k] = d;
  }
  return out;
}

PhaseScope::PhaseScope(SolveCounter* counter, std::string phase) : counter_(counter) {
  if (counter_) {
    saved_ = counter_->phase;
    counter_->phase = std::move(phase);
  }
}

PhaseScope::~PhaseScope() {
  if (counter_) counter_->phase = saved_;
}

GramSystem::GramSystem(const DenseMatrix& A, const DiagonalWeights& D, SolveCounter* counter) {
  const Index n = A.rows(), d = A.cols();
  if (D.values.size() != n) fail(ErrorKind::InvalidInput, "weight length does not match rows");
  if (!D.values.allFinite()) fail(ErrorKind::NonFinite, "diagonal weights are not finite");
  Vec s = D.clamped().cwiseSqrt();
  RowMat b = s.asDiagonal() * A.entries();
  k_ = Mat::Zero(d, d);
  k_.selfadjointView<Eigen::Lower>().rankUpdate(b.transpose());
  k_ = k_.selfadjointView<Eigen::Lower>();
  if (!k_.allFinite()) fail(ErrorKind::NonFinite, "Gram matrix overflowed");
  if (counter) counter->record_gram();

  llt_.compute(k_);
  bool ok = llt_.info() == Eigen::Success;
  double ratio = 0.0;
  if (ok) {
    const double dmax = llt_.matrixLLT().diagonal().cwiseAbs().maxCoeff();
    const double dmin = llt_.matrixLLT().diagonal().cwiseAbs().minCoeff();
    ratio = dmax > 0.0 ? dmin / dmax : 0.0;
  }
  // Forming the Gram matrix squares the condition number; past about 1e8 go
  // through QR of D^{1/2} A instead.
  if (!ok || ratio < 1e-4) {
    Eigen::HouseholderQR<Mat> qr(b);
    Mat r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    const double rmax = r.diagonal().cwiseAbs().maxCoeff();
    const double rmin = r.diagonal().cwiseAbs().minCoeff();
    if (rmin > 1e-15 * rmax) {
      use_qr_ = true;
      r_ = std::move(r);
      b_ = std::move(b);
      return;
    }
  }
  // Cholesky "succeeds" on matrices that are singular to working precision;
  // treat a collapsed pivot as failure.
  if (!ok || !(ratio > 1e-15)) {
    lambda_ = 1e-12 * k_.trace() / static_cast<double>(d);
    if (!(lambda_ > 0.0)) fail(ErrorKind::SingularGram, "Gram matrix is zero");
    Mat kr = k_;
    kr.diagonal().array() += lambda_;
    llt_.compute(kr);
    if (llt_.info() != Eigen::Success) fail(ErrorKind::SingularGram, "Gram factorization failed after Tikhonov shift");
  }
}

namespace {

Vec residual_ext(const Mat& k, double lambda, const Vec& x, const Vec& rhs) {
  const Index d = k.rows();
  Vec r(d);
  for (Index i = 0; i < d; ++i) {
    long double acc = static_cast<long double>(rhs(i)) - static_cast<long double>(lambda) * x(i);
    for (Index j = 0; j < d; ++j) acc -= static_cast<long double>(k(i, j)) * x(j);
    r(i) = static_cast<double>(acc);
  }
  return r;
}

// rhs - B^T B x accumulated in extended precision.
Vec residual_factored(const RowMat& b, const Vec& x, const Vec& rhs) {
  const Index n = b.rows(), d = b.cols();
  std::vector<long double> bx(n, 0.0L);
  for (Index i = 0; i < n; ++i) {
    long double acc = 0.0L;
    for (Index j = 0; j < d; ++j) acc += static_cast<long double>(b(i, j)) * x(j);
    bx[i] = acc;
  }
  Vec r(d);
  for (Index j = 0; j < d; ++j) {
    long double acc = static_cast<long double>(rhs(j));
    for (Index i = 0; i < n; ++i) acc -= static_cast<long double>(b(i, j)) * bx[i];
    r(j) = static_cast<double>(acc);
  }
  return r;
}

}  // namespace

Vec GramSystem::factor_solve(const Vec& rhs) const {
  if (!use_qr_) return llt_.solve(rhs);
  Vec y = r_.transpose().triangularView<Eigen::Lower>().solve(rhs);
  return r_.triangularView<Eigen::Upper>().solve(y);
}

Vec GramSystem::residual(const Vec& x, const Vec& rhs) const {
  return use_qr_ ? residual_factored(b_, x, rhs) : residual_ext(k_, lambda_, x, rhs);
}

Vec GramSystem::solve(const Vec& rhs, double rtol) const {
  if (rhs.size() != k_.rows()) fail(ErrorKind::InvalidInput, "rhs length does not match Gram size");
  if (!rhs.allFinite()) fail(ErrorKind::NonFinite, "rhs is not finite");
  Vec x = factor_solve(rhs);
  const double target = rtol * rhs.norm();
  for (int it = 0; it < 3; ++it) {
    Vec r = residual(x, rhs);
    if (r.norm() <= target) break;
    x += factor_solve(r);
  }
  return x;
}

Mat GramSystem::solve(const Mat& rhs, double rtol) const {
  Mat out(rhs.rows(), rhs.cols());
  for (Index j = 0; j < rhs.cols(); ++j) out.col(j) = solve(Vec(rhs.col(j)), rtol);
  return out;
}

Vec gram_solve(const DenseMatrix& A, const DiagonalWeights& D, const Vec& rhs, SolveCounter* counter,
               double rtol) {
  GramSystem sys(A, D, counter);
  return sys.solve(rhs, rtol);
}

double gram_residual(const DenseMatrix& A, const DiagonalWeights& D, const Vec& x, const Vec& rhs) {
  const RowMat& a = A.entries();
  Vec dv = D.clamped();
  const Index n = a.rows(), d = a.cols();
  std::vector<long double> ax(n, 0.0L);
  for (Index i = 0; i < n; ++i) {
    long double acc = 0.0L;
    for (Index j = 0; j < d; ++j) acc += static_cast<long double>(a(i, j)) * x(j);
    ax[i] = acc * dv(i);
  }
  long double num = 0.0L;
  for (Index j = 0; j < d; ++j) {
    long double acc = -static_cast<long double>(rhs(j));
    for (Index i = 0; i < n; ++i) acc += static_cast<long double>(a(i, j)) * ax[i];
    num += acc * acc;
  }
  const double den = rhs.norm();
  return den > 0 ? std::sqrt(static_cast<double>(num)) / den : std::sqrt(static_cast<double>(num));
}

BorderedSolution bordered_solve(const DenseMatrix& A, const DiagonalWeights& D, const Mat& C, const Vec& r1,
                                const Vec& r2, SolveCounter* counter) {
  GramSystem sys(A, D, counter);
  BorderedSolution out;
  if (C.rows() == 0) {
    out.x = sys.solve(r1);
    out.multipliers = Vec(0);
    return out;
  }
  Mat rhs(A.cols(), C.rows() + 1);
  rhs.col(0) = r1;
  rhs.rightCols(C.rows()) = C.transpose();
  Mat sol = sys.solve(rhs);
  Vec x1 = sol.col(0);
  Mat kc = sol.rightCols(C.rows());
  Mat schur = C * kc;
  Vec mu = schur.colPivHouseholderQr().solve(C * x1 - r2);
  out.x = x1 - kc * mu;
  out.multipliers = mu;
  return out;
}

Vec leverage_scores(const DenseMatrix& A, SolveCounter* counter) {
  return leverage_scores(A, Vec::Ones(A.rows()), counter);
}

Vec leverage_scores(const DenseMatrix& A, const Vec& row_scale, SolveCounter* counter) {
  const Index n = A.rows(), d = A.cols();
  if (row_scale.size() != n) fail(ErrorKind::InvalidInput, "row scale length does not match rows");
  if (!row_scale.allFinite()) fail(ErrorKind::NonFinite, "row scale is not finite");
  Mat b = row_scale.asDiagonal() * A.entries();
  Eigen::HouseholderQR<Mat> qr(b);
  const double rmax = qr.matrixQR().diagonal().cwiseAbs().maxCoeff();
  const double rmin = qr.matrixQR().diagonal().cwiseAbs().minCoeff();
  if (!(rmin > 1e-14 * rmax)) fail(ErrorKind::SingularGram, "reweighted matrix is rank deficient");
  if (counter) counter->record_gram();
  Mat q = qr.householderQ() * Mat::Identity(n, d);
  return q.rowwise().squaredNorm();
}

Index sketch_rows(Index n, double eps) {
  if (n < 2) return 0;
  return static_cast<Index>(std::ceil(8.0 / (eps * eps) * std::log(static_cast<double>(n))));
}

Vec approx_lev(const DenseMatrix& A, double eps, std::uint64_t seed, SolveCounter* counter, SketchPolicy policy) {
  return approx_lev(A, Vec::Ones(A.rows()), eps, seed, counter, policy);
}

Vec approx_lev(const DenseMatrix& A, const Vec& row_scale, double eps, std::uint64_t seed, SolveCounter* counter,
               SketchPolicy policy) {
  if (!(eps > 0.0 && eps < 1.0)) fail(ErrorKind::InvalidInput, "approx_lev needs eps in (0, 1)");
  const Index n = A.rows(), d = A.cols();
  const Index k = sketch_rows(n, eps);
  const bool sketch = policy == SketchPolicy::Always ? k > 0 : (policy == SketchPolicy::Auto && k > 0 && k < n);
  if (!sketch) return leverage_scores(A, row_scale, counter);

  if (!row_scale.allFinite()) fail(ErrorKind::NonFinite, "row scale is not finite");
  RowMat b = row_scale.asDiagonal() * A.entries();
  Mat kmat = Mat::Zero(d, d);
  kmat.selfadjointView<Eigen::Lower>().rankUpdate(b.transpose());
  kmat = kmat.selfadjointView<Eigen::Lower>();
  Eigen::LLT<Mat> llt(kmat);
  if (llt.info() != Eigen::Success) fail(ErrorKind::SingularGram, "sketch Gram factorization failed");
  if (counter) {
    counter->record_gram();
    counter->sketch_applications += k;
  }

  // G = (S B)^T (S B) for a k x n random sign matrix S / sqrt(k), built in row blocks.
  std::mt19937_64 rng(seed);
  Mat g = Mat::Zero(d, d);
  const Index block = 256;
  Mat s(block, n);
  for (Index start = 0; start < k; start += block) {
    const Index rows = std::min(block, k - start);
    for (Index r = 0; r < rows; ++r) {
      std::uint64_t bits = 0;
      for (Index i = 0; i < n; ++i) {
        if ((i & 63) == 0) bits = rng();
        s(r, i) = (bits & 1ULL) ? 1.0 : -1.0;
        bits >>= 1;
      }
    }
    Mat y = s.topRows(rows) * b;
    g.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose());
  }
  g = g.selfadjointView<Eigen::Lower>();
  g /= static_cast<double>(k);

  Mat z = llt.matrixL().solve(b.transpose());  // d x n
  Mat lt = llt.matrixL().solve(g);
  Mat pm = llt.matrixL().solve(lt.transpose());  // L^-1 G L^-T
  Vec out(n);
  for (Index i = 0; i < n; ++i) out(i) = z.col(i).dot(pm * z.col(i));
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double norm_p(const Vec& x, double p) {
  if (x.size() == 0) return 0.0;
  if (std::isinf(p)) return x.cwiseAbs().maxCoeff();
  const double m = x.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  return m * std::pow((x.cwiseAbs() / m).array().pow(p).sum(), 1.0 / p);
}

double norm_p_pow(const Vec& x, double p) { return x.cwiseAbs().array().pow(p).sum(); }

bool all_finite(const Vec& x) { return x.allFinite(); }

DenseMatrix read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open matrix file " + path);
  long long n = 0, d = 0;
  if (!(in >> n >> d) || n <= 0 || d <= 0) fail(ErrorKind::InvalidInput, "bad matrix header in " + path);
  RowMat a(n, d);
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < d; ++j)
      if (!(in >> a(i, j))) fail(ErrorKind::InvalidInput, "matrix file truncated: " + path);
  std::string extra;
  if (in >> extra) fail(ErrorKind::InvalidInput, "trailing data in matrix file " + path);
  return DenseMatrix(std::move(a));
}

Vec read_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open vector file " + path);
  std::vector<double> vals;
  std::string tok;
  while (in >> tok) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidInput, "bad number '" + tok + "' in " + path);
    }
    if (pos != tok.size()) fail(ErrorKind::InvalidInput, "bad number '" + tok + "' in " + path);
    vals.push_back(v);
  }
  Vec v = Eigen::Map<Vec>(vals.data(), static_cast<Index>(vals.size()));
  if (!v.allFinite()) fail(ErrorKind::NonFinite, "vector has non-finite entries: " + path);
  return v;
}

void write_matrix(const std::string& path, const DenseMatrix& A) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path);
  out << A.rows() << ' ' << A.cols() << '\n' << std::setprecision(17);
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) out << (j ? " " : "") << A.entries()(i, j);
    out << '\n';
  }
}

void write_vector(const std::string& path, const Vec& v) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path);
  out << std::setprecision(17);
  for (Index i = 0; i < v.size(); ++i) out << v(i) << '\n';
}

}  // namespace lpreg
