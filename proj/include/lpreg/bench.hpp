#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lpreg/dual.hpp"
#include "lpreg/refinement.hpp"

namespace lpreg {

// Families: gaussian, ill_conditioned, planted_residual, coherent_rows.
// Deterministic in (family, n, d, seed). noise scales the planted residual.
ProblemInstance gen_instance(const std::string& family, Index n, Index d, std::uint64_t seed, double noise = 1.0);

// Minimum ||A x - b||_p to relative tolerance tol, p in (1, inf]. Shares only the
// matrix storage with the solvers.
struct OracleValue {
  double opt = 0.0;    // best objective found
  double lower = 0.0;  // certified lower bound
  Vec x;
};

OracleValue oracle_solve(const ProblemInstance& inst, double tol);
double oracle_opt(const ProblemInstance& inst, double tol);

// Stacked dual instance U = [A b g], v = (0, ..., 0, 1, -1) with a witness x:
// U^T x = v, x^T R x = 1, ||x||_p = 1.
struct PlantedDual {
  std::shared_ptr<DenseMatrix> A;
  DualInstance inst;
  Vec witness;
};

PlantedDual plant_dual_instance(Index n, Index d, double q, std::uint64_t seed);

struct ExperimentConfig {
  std::string method = "mwu";
  double p = 4.0;
  double eps = 1e-8;
  std::string family = "gaussian";
  std::vector<std::pair<Index, Index>> sizes;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "bench_out";
  bool oracle = true;  // only used where n <= 500 and d <= 20

  static ExperimentConfig from_json_text(const std::string& text);
};

struct ExperimentRow {
  SolveReport report;
  double oracle_value = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  double slope = 0.0;  // least-squares slope of log gram_solves against log d; NaN with < 2 distinct d
  std::string csv;
};

// Dispatch by method id: mwu, accel, dual, linf, refine.
RefineResult solve_with_method(const std::string& method, const ProblemInstance& inst, std::uint64_t seed,
                               SolveCounter* counter = nullptr);

// Runs every (size, seed) row; solver errors are recorded per row. Writes one
// JSON report per row, results.csv and scaling.json under config.output
// (skipped when output is empty).
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string report_to_json(const SolveReport& report, int indent = 2);
double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace lpreg
