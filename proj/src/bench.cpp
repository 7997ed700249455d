#include "lpreg/bench.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lpreg/accel.hpp"
#include "lpreg/linf.hpp"
#include "lpreg/mwu.hpp"

namespace lpreg {

namespace {

std::uint64_t family_code(const std::string& family) {
  if (family == "gaussian") return 1;
  if (family == "ill_conditioned") return 2;
  if (family == "planted_residual") return 3;
  if (family == "coherent_rows") return 4;
  fail(ErrorKind::InvalidInput, "unknown instance family: " + family);
}

RowMat gaussian_matrix(Index n, Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  RowMat A(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) A(i, j) = N(rng);
  return A;
}

Vec gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = N(rng);
  return v;
}

Mat orthonormal_columns(Index n, Index d, std::mt19937_64& rng) {
  Mat G = gaussian_matrix(n, d, rng);
  Eigen::HouseholderQR<Mat> qr(G);
  return qr.householderQ() * Mat::Identity(n, d);
}

double condition_number(const RowMat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || !(s(s.size() - 1) > 0.0)) return kInf;
  return s(0) / s(s.size() - 1);
}

}  // namespace

ProblemInstance gen_instance(const std::string& family, Index n, Index d, std::uint64_t seed, double noise) {
  if (n < 1 || d < 1 || n < d) fail(ErrorKind::InvalidInput, "instance needs n >= d >= 1");
  const std::uint64_t code = family_code(family);
  std::mt19937_64 rng(derive_seed(derive_seed(seed, code), static_cast<std::uint64_t>(n * 131 + d)));
  RowMat A;
  Vec b;
  if (family == "gaussian") {
    A = gaussian_matrix(n, d, rng);
    b = gaussian_vector(n, rng);
  } else if (family == "ill_conditioned") {
    Mat U = orthonormal_columns(n, d, rng);
    Mat V = orthonormal_columns(d, d, rng);
    Vec s(d);
    for (Index j = 0; j < d; ++j) s(j) = d == 1 ? 1.0 : std::pow(10.0, -6.0 * static_cast<double>(j) / (d - 1));
    A = U * s.asDiagonal() * V.transpose();
    b = gaussian_vector(n, rng);
  } else if (family == "planted_residual") {
    A = gaussian_matrix(n, d, rng);
    Vec x0 = gaussian_vector(d, rng);
    std::normal_distribution<double> N;
    Vec nu(n);
    // small dense noise plus a sparse set of large spikes
    for (Index i = 0; i < n; ++i) {
      const double z = N(rng);
      nu(i) = i % 10 == 0 ? (z >= 0 ? 5.0 : -5.0) : 0.1 * z;
    }
    b = A * x0 + noise * nu;
  } else {
    A = gaussian_matrix(n, d, rng);
    A.row(0) *= 100.0;
    b = gaussian_vector(n, rng);
  }
  for (int attempt = 0; condition_number(A) > 1e12; ++attempt) {
    if (attempt == 3) fail(ErrorKind::RankDeficient, "generated matrix stays rank deficient");
    A += 1e-6 * gaussian_matrix(n, d, rng);
  }
  ProblemInstance inst{DenseMatrix(A), b, 2.0, 1e-8};
  return inst;
}

namespace {

// Everything below works in an orthonormal basis Q of range(A); x = R^{-1} z.
struct OrthoBasis {
  Mat Q;
  Mat R;
  explicit OrthoBasis(const RowMat& A) {
    const Index n = A.rows(), d = A.cols();
    Eigen::HouseholderQR<Mat> qr(A);
    Q = qr.householderQ() * Mat::Identity(n, d);
    R = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    const double rmax = R.diagonal().cwiseAbs().maxCoeff();
    if (!(R.diagonal().cwiseAbs().minCoeff() > 1e-14 * rmax)) fail(ErrorKind::RankDeficient, "oracle: A is rank deficient");
  }
  Vec to_x(const Vec& z) const { return R.triangularView<Eigen::Upper>().solve(z); }
  Vec project_out(const Vec& y) const { return y - Q * (Q.transpose() * y); }
};

double pnorm(const Vec& v, double p) {
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  const double m = v.cwiseAbs().maxCoeff();
  if (!(m > 0.0)) return 0.0;
  return m * std::pow((v.cwiseAbs() / m).array().pow(p).sum(), 1.0 / p);
}

OracleValue oracle_finite(const ProblemInstance& inst, double tol) {
  const double p = inst.p;
  const Vec& b = inst.b;
  OrthoBasis basis(inst.A.entries());
  const Mat& Q = basis.Q;
  const double q = p / (p - 1.0);
  Vec z = Q.transpose() * b;
  Vec r = Q * z - b;
  OracleValue out;
  const double bscale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if (r.cwiseAbs().maxCoeff() <= 1e-13 * bscale) {
    out.x = basis.to_x(z);
    out.opt = pnorm(r, p);
    return out;
  }
  // work with F / s^p for s the current residual scale to keep powers in range
  auto F = [&](const Vec& zz, double s) { return ((Q * zz - b).cwiseAbs() / s).array().pow(p).sum(); };
  auto certify = [&](const Vec& y) {
    Vec yp = basis.project_out(y);
    const double den = pnorm(yp, q);
    if (den > 0.0) out.lower = std::max(out.lower, std::abs(b.dot(yp)) / den);
  };
  auto dual_gap_done = [&](const Vec& rr) {
    certify(rr.cwiseSign().cwiseProduct((rr.cwiseAbs() / rr.cwiseAbs().maxCoeff()).array().pow(p - 1.0).matrix()));
    out.opt = pnorm(rr, p);
    return out.opt <= (1.0 + tol) * out.lower;
  };

  // first-order phase
  double step = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double s = r.cwiseAbs().maxCoeff();
    Vec u = r / s;
    Vec g = p * Q.transpose() * u.cwiseSign().cwiseProduct(u.cwiseAbs().array().pow(p - 1.0).matrix());
    const double gn = g.norm();
    const double f0 = u.cwiseAbs().array().pow(p).sum();
    if (gn <= 1e-3 * f0) break;
    step *= 2.0;
    while (step > 1e-20 && F(z - step * s * g, s) > f0 - 1e-4 * step * gn * gn) step *= 0.5;
    z -= step * s * g;
    r = Q * z - b;
  }
  // p < 2: Newton stalls at the kinks where residuals vanish, so follow the
  // smoothed objective sum (r^2 + mu^2)^{p/2} down in mu instead
  if (p < 2.0) {
    const double s = r.cwiseAbs().maxCoeff();
    auto Fmu = [&](const Vec& zz, double mu) {
      return (((Q * zz - b) / s).array().square() + mu * mu).pow(p / 2.0).sum();
    };
    for (double mu = 1e-1; mu >= 1e-15; mu *= 0.1) {
      for (int it = 0; it < 100; ++it) {
        Vec u = r / s;
        Vec e = (u.array().square() + mu * mu).matrix();
        Vec g = p * Q.transpose() * u.cwiseProduct(e.array().pow(p / 2.0 - 1.0).matrix());
        Vec h = (p * e.array().pow(p / 2.0 - 2.0) * ((p - 1.0) * u.array().square() + mu * mu)).matrix();
        Mat H = Q.transpose() * h.asDiagonal() * Q;
        Vec dz = -H.ldlt().solve(g);
        const double sl = g.dot(dz);
        const double f0 = Fmu(z, mu);
        if (!(sl < 0.0) || -sl <= 1e-30 * f0) break;
        double a = 1.0;
        while (a > 1e-20 && Fmu(z + a * s * dz, mu) > f0 + 1e-4 * a * sl) a *= 0.5;
        if (a <= 1e-20) break;
        z += a * s * dz;
        r = Q * z - b;
        if (-sl <= 1e-24 * f0) break;
      }
      Vec u = r / s;
      certify(u.cwiseProduct((u.array().square() + mu * mu).pow(p / 2.0 - 1.0).matrix()));
      if (dual_gap_done(r)) {
        out.x = basis.to_x(z);
        return out;
      }
    }
  }
  // damped second-order polish
  for (int it = 0; it < 500; ++it) {
    if (dual_gap_done(r)) {
      out.x = basis.to_x(z);
      return out;
    }
    const double s = r.cwiseAbs().maxCoeff();
    Vec u = r / s;
    Vec au = u.cwiseAbs();
    Vec g = p * Q.transpose() * u.cwiseSign().cwiseProduct(au.array().pow(p - 1.0).matrix());
    Vec h = p * (p - 1.0) * au.cwiseMax(p < 2.0 ? 1e-10 : 0.0).array().pow(p - 2.0).matrix();
    Mat H = Q.transpose() * h.asDiagonal() * Q;
    H.diagonal().array() += 1e-14 * std::max(H.diagonal().maxCoeff(), 1e-300);
    Vec dz = -H.ldlt().solve(g);
    const double f0 = au.array().pow(p).sum();
    const double slope = g.dot(dz);
    if (!(slope < 0.0)) {
      dz = -g;
    }
    double a = 1.0;
    const double sl = g.dot(dz);
    while (a > 1e-20 && F(z + a * s * dz, s) > f0 + 1e-4 * a * sl) a *= 0.5;
    if (a <= 1e-20) break;
    z += a * s * dz;
    r = Q * z - b;
  }
  if (dual_gap_done(r)) {
    out.x = basis.to_x(z);
    return out;
  }
  fail(ErrorKind::NoConvergence, "oracle did not reach the requested tolerance");
}

OracleValue oracle_inf(const ProblemInstance& inst, double tol) {
  const Vec& b = inst.b;
  OrthoBasis basis(inst.A.entries());
  const Mat& Q = basis.Q;
  Vec z = Q.transpose() * b;
  Vec r = Q * z - b;
  OracleValue out;
  const double bscale = std::max(1.0, b.cwiseAbs().maxCoeff());
  out.opt = r.cwiseAbs().maxCoeff();
  Vec zbest = z;
  if (out.opt <= 1e-13 * bscale) {
    out.x = basis.to_x(z);
    return out;
  }
  auto certify = [&](const Vec& y) {
    Vec yp = basis.project_out(y);
    const double den = yp.cwiseAbs().sum();
    if (den > 0.0) out.lower = std::max(out.lower, std::abs(b.dot(yp)) / den);
  };
  certify(r);
  for (int level = 0; level < 300 && out.opt > (1.0 + tol) * out.lower; ++level) {
    const double t = 0.5 * (out.opt + out.lower);
    // semismooth Newton on 1/2 sum (|r_i| - t)_+^2
    for (int it = 0; it < 200; ++it) {
      Vec excess = (r.cwiseAbs().array() - t).max(0.0).matrix();
      if (excess.maxCoeff() <= 0.0) break;
      Vec y = r.cwiseSign().cwiseProduct(excess);
      Vec g = Q.transpose() * y;
      const double f0 = 0.5 * excess.squaredNorm();
      if (g.norm() <= 1e-15 * std::max(1.0, excess.norm())) break;
      Vec act = (excess.array() > 0.0).cast<double>().matrix();
      Mat H = Q.transpose() * act.asDiagonal() * Q;
      H.diagonal().array() += 1e-12;
      Vec dz = -H.ldlt().solve(g);
      double a = 1.0;
      auto hinge = [&](const Vec& zz) {
        return 0.5 * ((Q * zz - b).cwiseAbs().array() - t).max(0.0).square().sum();
      };
      while (a > 1e-16 && hinge(z + a * dz) > f0 + 1e-4 * a * g.dot(dz)) a *= 0.5;
      if (a <= 1e-16) break;
      z += a * dz;
      r = Q * z - b;
    }
    const double cur = r.cwiseAbs().maxCoeff();
    if (cur < out.opt) {
      out.opt = cur;
      zbest = z;
    }
    Vec excess = (r.cwiseAbs().array() - t).max(0.0).matrix();
    if (excess.maxCoeff() > 0.0) certify(r.cwiseSign().cwiseProduct(excess));
  }
  out.x = basis.to_x(zbest);
  if (out.opt > (1.0 + tol) * out.lower) fail(ErrorKind::NoConvergence, "linf oracle did not converge");
  return out;
}

}  // namespace

OracleValue oracle_solve(const ProblemInstance& inst, double tol) {
  const double p = inst.p;
  if (!(p > 1.0)) fail(ErrorKind::InvalidInput, "oracle needs p > 1");
  if (!(tol > 0.0)) fail(ErrorKind::InvalidInput, "oracle tolerance must be positive");
  if (inst.b.size() != inst.A.rows()) fail(ErrorKind::InvalidInput, "rhs length does not match rows");
  return std::isinf(p) ? oracle_inf(inst, tol) : oracle_finite(inst, tol);
}

double oracle_opt(const ProblemInstance& inst, double tol) { return oracle_solve(inst, tol).opt; }

PlantedDual plant_dual_instance(Index n, Index d, double q, std::uint64_t seed) {
  if (!(q > 1.0 && q <= 2.0)) fail(ErrorKind::InvalidInput, "planted dual needs q in (1, 2]");
  const double p = dual_exponent(q);
  std::mt19937_64 rng(derive_seed(seed, 77));
  PlantedDual out;
  out.A = std::make_shared<DenseMatrix>(gaussian_matrix(n, d, rng));
  const DenseMatrix& A = *out.A;
  Vec x = gaussian_vector(n, rng);
  x -= A.apply(gram_solve(A, DiagonalWeights::ones(n), A.apply_t(x)));
  x /= norm_p(x, p);
  const double xx = x.squaredNorm();
  Vec b = gaussian_vector(n, rng);
  b += (1.0 - b.dot(x)) / xx * x;
  Vec g = gaussian_vector(n, rng);
  g += (-1.0 - g.dot(x)) / xx * x;
  std::uniform_real_distribution<double> U(0.5, 1.5);
  Vec R(n);
  for (Index i = 0; i < n; ++i) R(i) = U(rng);
  R /= (R.array() * x.array().square()).sum();
  out.inst.A = out.A.get();
  out.inst.extra = Mat(n, 2);
  out.inst.extra.col(0) = b;
  out.inst.extra.col(1) = g;
  out.inst.v = Vec::Zero(d + 2);
  out.inst.v(d) = 1.0;
  out.inst.v(d + 1) = -1.0;
  out.inst.R = R;
  out.inst.p = p;
  out.witness = x;
  return out;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.method = j.value("method", c.method);
    if (j.contains("q")) c.p = j.at("q").get<double>();
    c.p = j.value("p", c.p);
    c.eps = j.value("eps", c.eps);
    c.family = j.value("family", c.family);
    c.output = j.value("output", c.output);
    c.oracle = j.value("oracle", c.oracle);
    if (j.contains("sizes")) {
      c.sizes.clear();
      for (const auto& s : j.at("sizes")) {
        if (s.is_array() && s.size() == 2)
          c.sizes.emplace_back(s[0].get<Index>(), s[1].get<Index>());
        else
          c.sizes.emplace_back(s.at("n").get<Index>(), s.at("d").get<Index>());
      }
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("bad config field: ") + e.what());
  }
  static const char* methods[] = {"mwu", "accel", "dual", "linf", "refine"};
  bool known = false;
  for (const char* m : methods) known = known || c.method == m;
  if (!known) fail(ErrorKind::InvalidInput, "unknown method: " + c.method);
  family_code(c.family);
  for (const auto& [n, d] : c.sizes)
    if (n > 2000 || d > 64 || d < 1 || n < d) fail(ErrorKind::InvalidInput, "size outside n <= 2000, d <= 64, n >= d");
  if (!(c.eps > 0.0)) fail(ErrorKind::InvalidInput, "eps must be positive");
  return c;
}

RefineResult solve_with_method(const std::string& method, const ProblemInstance& inst, std::uint64_t seed,
                               SolveCounter* counter) {
  if (method == "mwu") return solve_mwu(inst, seed, counter);
  if (method == "refine") return solve_refine(inst, seed, counter);
  if (method == "accel") return solve_accel(inst, seed, counter);
  if (method == "dual") return solve_dual(inst, seed, counter);
  if (method == "linf") return linf_regress(inst.A, inst.b, inst.eps, seed, counter);
  fail(ErrorKind::InvalidInput, "unknown method: " + method);
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t m = std::min(xs.size(), ys.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) continue;
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  const double den = k * sxx - sx * sx;
  if (k < 2 || !(std::abs(den) > 1e-12)) return std::numeric_limits<double>::quiet_NaN();
  return (k * sxy - sx * sy) / den;
}

namespace {

nlohmann::json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string fmt(const char* f, double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string report_to_json(const SolveReport& r, int indent) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["method"] = r.method;
  j["p"] = num(r.p);
  j["eps"] = num(r.eps);
  j["n"] = r.n;
  j["d"] = r.d;
  j["seed"] = r.seed;
  j["gram_solves"] = r.gram_solves;
  j["sketch_applications"] = r.sketch_applications;
  j["gram_by_phase"] = r.gram_by_phase;
  j["counters"] = r.counters;
  j["residual_lp"] = num(r.residual_lp);
  j["residual_l2"] = num(r.residual_l2);
  j["dual_bound"] = num(r.dual_bound);
  j["certified_gap"] = num(r.certified_gap);
  j["wall_time"] = r.wall_time;
  j["error"] = r.error;
  j["notes"] = r.notes;
  return j.dump(indent);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult res;
  const bool linf = config.method == "linf";
  std::ostringstream csv;
  csv << "n,d,method,p,eps,gram_solves,certified_gap\n";
  namespace fs = std::filesystem;
  if (!config.output.empty()) fs::create_directories(config.output);
  std::vector<double> ds, gs;
  for (const auto& [n, d] : config.sizes) {
    for (std::uint64_t seed : config.seeds) {
      ExperimentRow row;
      ProblemInstance inst = gen_instance(config.family, n, d, seed);
      inst.p = linf ? kInf : config.p;
      inst.eps = config.eps;
      try {
        SolveCounter counter;
        RefineResult r = solve_with_method(config.method, inst, seed, &counter);
        row.report = r.report;
        if (config.oracle && n <= 500 && d <= 20) {
          row.oracle_value = oracle_opt(inst, 1e-9);
          const double scale = std::max(1.0, inst.b.cwiseAbs().maxCoeff());
          if (row.oracle_value > 1e-13 * scale)
            row.report.certified_gap = row.report.residual_lp / row.oracle_value - 1.0;
          else
            row.report.certified_gap = row.report.residual_lp <= 1e-10 * scale ? 0.0 : kInf;
        }
        ds.push_back(static_cast<double>(d));
        gs.push_back(static_cast<double>(row.report.gram_solves));
      } catch (const SolverError& e) {
        row.report.error = e.what();
      }
      row.report.method = config.method;
      row.report.p = inst.p;
      row.report.eps = inst.eps;
      row.report.n = n;
      row.report.d = d;
      row.report.seed = seed;
      csv << n << ',' << d << ',' << config.method << ',' << fmt("%g", inst.p) << ',' << fmt("%g", inst.eps) << ','
          << row.report.gram_solves << ',' << fmt("%.6e", row.report.certified_gap) << '\n';
      if (!config.output.empty()) {
        std::ofstream f(fs::path(config.output) /
                        ("report_n" + std::to_string(n) + "_d" + std::to_string(d) + "_s" + std::to_string(seed) +
                         ".json"));
        f << report_to_json(row.report) << '\n';
      }
      res.rows.push_back(std::move(row));
    }
  }
  res.csv = csv.str();
  res.slope = loglog_slope(ds, gs);
  if (!config.output.empty()) {
    std::ofstream(fs::path(config.output) / "results.csv") << res.csv;
    nlohmann::json s;
    s["schema_version"] = 1;
    s["method"] = config.method;
    s["p"] = num(linf ? kInf : config.p);
    s["loglog_slope_gram_vs_d"] = num(res.slope);
    s["points"] = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.size(); ++i) s["points"].push_back({{"d", ds[i]}, {"gram_solves", gs[i]}});
    std::ofstream(fs::path(config.output) / "scaling.json") << s.dump(2) << '\n';
  }
  return res;
}

}  // namespace lpreg
