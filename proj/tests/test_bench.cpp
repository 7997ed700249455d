#include "doctest.h"
#include "lpreg/bench.hpp"
#include "test_util.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

using namespace lpreg;
using testutil::rows;
using testutil::vec;

TEST_CASE("generators are deterministic and well formed") {
  ProblemInstance a = gen_instance("gaussian", 10, 2, 0), b = gen_instance("gaussian", 10, 2, 0);
  CHECK(a.A.entries() == b.A.entries());
  CHECK(a.b == b.b);
  ProblemInstance c = gen_instance("gaussian", 10, 2, 1);
  CHECK(c.A.entries() != a.A.entries());

  ProblemInstance ill = gen_instance("ill_conditioned", 100, 8, 0);
  Eigen::JacobiSVD<Mat> svd(ill.A.entries());
  const double cond = svd.singularValues()(0) / svd.singularValues()(7);
  CHECK(cond >= 1e5);
  CHECK(cond <= 1e7);

  ProblemInstance exact = gen_instance("planted_residual", 60, 4, 2, 0.0);
  exact.p = 4;
  CHECK(oracle_opt(exact, 1e-9) <= 1e-12);

  ProblemInstance coh = gen_instance("coherent_rows", 60, 4, 0);
  CHECK(coh.A.entries().row(0).norm() > 20 * coh.A.entries().row(1).norm());

  CHECK_THROWS_AS(gen_instance("nope", 10, 2, 0), SolverError);
  CHECK_THROWS_AS(gen_instance("gaussian", 2, 3, 0), SolverError);
}

TEST_CASE("oracle examples") {
  DenseMatrix A(rows({{1}, {1}}));
  ProblemInstance inst{A, vec({0, 2}), 4.0, 1e-8};
  CHECK(oracle_opt(inst, 1e-12) == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-10));
  inst.p = kInf;
  CHECK(oracle_opt(inst, 1e-12) == doctest::Approx(1.0).epsilon(1e-10));
  inst.p = 1.5;
  CHECK(oracle_opt(inst, 1e-12) == doctest::Approx(std::pow(2.0, 1 / 1.5)).epsilon(1e-10));

  DenseMatrix B(testutil::gaussian(30, 3, 1));
  ProblemInstance fit{B, B.apply(vec({1, 2, 3})), 3.0, 1e-8};
  CHECK(oracle_opt(fit, 1e-9) <= 1e-12);
  fit.p = kInf;
  CHECK(oracle_opt(fit, 1e-9) <= 1e-12);

  // p = 2 against the normal equations
  ProblemInstance ls{B, testutil::gaussian_vec(30, 2), 2.0, 1e-8};
  Vec x = B.entries().colPivHouseholderQr().solve(ls.b);
  CHECK(oracle_opt(ls, 1e-12) == doctest::Approx((B.apply(x) - ls.b).norm()).epsilon(1e-10));

  // upper and lower agree
  for (double p : {1.25, 3.0, 8.0, kInf}) {
    ProblemInstance g = gen_instance("ill_conditioned", 80, 5, 3);
    g.p = p;
    OracleValue o = oracle_solve(g, 1e-9);
    CHECK(o.opt <= (1 + 1e-9) * o.lower);
    CHECK(o.lower <= o.opt);
  }
}

TEST_CASE("config parsing") {
  ExperimentConfig c = ExperimentConfig::from_json_text(
      R"({"method":"accel","p":3,"eps":1e-6,"family":"coherent_rows","sizes":[[40,4],{"n":60,"d":5}],"seeds":[1,2],"output":""})");
  CHECK(c.method == "accel");
  CHECK(c.p == 3.0);
  CHECK(c.sizes.size() == 2);
  CHECK(c.sizes[1].second == 5);
  CHECK(c.seeds.size() == 2);
  CHECK(ExperimentConfig::from_json_text(R"({"method":"dual","q":1.5})").p == 1.5);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), SolverError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"method":"simplex"})"), SolverError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"sizes":[[5000,4]]})"), SolverError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"sizes":[[100,80]]})"), SolverError);
}

TEST_CASE("experiment runner") {
  ExperimentConfig empty;
  empty.output = "";
  ExperimentResult e = run_experiment(empty);
  CHECK(e.csv == "n,d,method,p,eps,gram_solves,certified_gap\n");
  CHECK(e.rows.empty());

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "lpreg_bench_test";
  fs::remove_all(dir);
  ExperimentConfig c;
  c.method = "accel";
  c.p = 4;
  c.eps = 1e-8;
  c.sizes = {{40, 2}, {80, 4}};
  c.seeds = {0, 1};
  c.output = dir.string();
  ExperimentResult r1 = run_experiment(c);
  ExperimentResult r2 = run_experiment(c);
  CHECK(r1.csv == r2.csv);
  CHECK(r1.rows.size() == 4);
  for (const auto& row : r1.rows) {
    CHECK(row.report.error.empty());
    CHECK(row.report.certified_gap <= 1e-8);
    std::int64_t total = 0;
    for (const auto& [k, v] : row.report.gram_by_phase) total += v;
    CHECK(total == row.report.gram_solves);
  }
  CHECK(std::isfinite(r1.slope));
  std::ifstream f(dir / "results.csv");
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == r1.csv);
  std::ifstream jf(dir / "report_n40_d2_s0.json");
  nlohmann::json j = nlohmann::json::parse(jf);
  CHECK(j["schema_version"] == 1);
  CHECK(j["method"] == "accel");
  CHECK(fs::exists(dir / "scaling.json"));
  fs::remove_all(dir);

  // solver errors are recorded per row and the run continues
  ExperimentConfig bad;
  bad.method = "mwu";
  bad.p = 20;
  bad.sizes = {{30, 2}};
  bad.output = "";
  ExperimentResult b = run_experiment(bad);
  REQUIRE(b.rows.size() == 1);
  CHECK(!b.rows[0].report.error.empty());
  CHECK(b.csv.find("nan") != std::string::npos);
}

TEST_CASE("report json and slope") {
  SolveReport r;
  r.method = "mwu";
  r.gram_solves = 7;
  nlohmann::json j = nlohmann::json::parse(report_to_json(r));
  CHECK(j["certified_gap"].is_null());
  CHECK(j["gram_solves"] == 7);
  CHECK(loglog_slope({8, 16, 32}, {3, 3 * std::pow(2.0, 0.2), 3 * std::pow(4.0, 0.2)}) == doctest::Approx(0.2));
  CHECK(std::isnan(loglog_slope({8, 8}, {1, 2})));
}
