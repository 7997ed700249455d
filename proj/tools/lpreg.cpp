// lpreg command line: solve, bench, weights.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lpreg/bench.hpp"
#include "lpreg/lewis.hpp"

using namespace lpreg;

namespace {

constexpr int kExitSolver = 2;
constexpr int kExitInput = 3;

double parse_exponent(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "INF") return kInf;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::InvalidInput, "cannot parse exponent: " + s);
  }
}

std::string read_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::InvalidInput, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lp-norm regression solvers"};
  app.require_subcommand(1);

  std::string matrix, rhs, method = "mwu", report, output, p_text = "4", config;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  auto* solve = app.add_subcommand("solve", "solve min ||Ax - b||_p");
  solve->add_option("--matrix", matrix, "matrix file")->required();
  solve->add_option("--rhs", rhs, "right-hand side file")->required();
  solve->add_option("--p", p_text, "exponent (q for the dual method, inf for linf)");
  solve->add_option("--eps", eps, "relative accuracy");
  solve->add_option("--method", method, "mwu, accel, dual, linf or refine")
      ->check(CLI::IsMember({"mwu", "accel", "dual", "linf", "refine"}));
  solve->add_option("--seed", seed, "random seed");
  solve->add_option("--report", report, "write the JSON report here");
  solve->add_option("--output", output, "write x here instead of stdout");

  auto* bench = app.add_subcommand("bench", "run an experiment config");
  bench->add_option("--config", config, "JSON experiment config")->required();

  auto* weights = app.add_subcommand("weights", "Lewis weight overestimates");
  weights->add_option("--matrix", matrix, "matrix file")->required();
  weights->add_option("--p", p_text, "exponent, or inf");
  weights->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*solve) {
      ProblemInstance inst{read_matrix(matrix), read_vector(rhs), parse_exponent(p_text), eps};
      if (method == "linf") inst.p = kInf;
      RefineResult r = solve_with_method(method, inst, seed);
      if (!report.empty()) {
        std::ofstream f(report);
        if (!f) fail(ErrorKind::InvalidInput, "cannot write " + report);
        f << report_to_json(r.report) << '\n';
      }
      if (!output.empty()) {
        write_vector(output, r.x);
      } else {
        for (Index j = 0; j < r.x.size(); ++j) std::printf("%.17g\n", r.x(j));
      }
      std::fprintf(stderr, "objective %.12g lower_bound %.12g gram_solves %lld\n", r.objective, r.lower_bound,
                   static_cast<long long>(r.report.gram_solves));
    } else if (*bench) {
      ExperimentConfig cfg = ExperimentConfig::from_json_text(read_text(config));
      ExperimentResult res = run_experiment(cfg);
      std::cout << res.csv;
      std::fprintf(stderr, "rows %zu loglog_slope %.4f\n", res.rows.size(), res.slope);
    } else if (*weights) {
      DenseMatrix A = read_matrix(matrix);
      LewisOverestimate w = lewis_overestimates(A, parse_exponent(p_text), seed);
      for (Index i = 0; i < w.weights.size(); ++i) std::printf("%.17g\n", w.weights(i));
      std::fprintf(stderr, "mass %.12g max_shortfall %.3g\n", w.mass, w.max_shortfall);
    }
  } catch (const SolverError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_input_error(e.kind()) ? kExitInput : kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  return 0;
}
