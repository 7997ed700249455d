#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace lpreg {

struct SolveReport {
  std::string method;
  double p = 0.0;
  double eps = 0.0;
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::uint64_t seed = 0;

  std::int64_t gram_solves = 0;
  std::int64_t sketch_applications = 0;
  std::map<std::string, std::int64_t> gram_by_phase;
  // progress_steps, boost_steps, prox_calls, inner_iterations, solver_calls, ...
  std::map<std::string, std::int64_t> counters;

  double residual_lp = std::numeric_limits<double>::quiet_NaN();
  double residual_l2 = std::numeric_limits<double>::quiet_NaN();
  // Lower bound on OPT carried by the solver's own dual certificate.
  double dual_bound = std::numeric_limits<double>::quiet_NaN();
  // residual_lp / oracle OPT - 1, filled in only when an oracle ran.
  double certified_gap = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;
  std::string error;
  std::vector<std::string> notes;

  void bump(const std::string& key, std::int64_t by = 1) { counters[key] += by; }
  std::int64_t counter(const std::string& key) const {
    auto it = counters.find(key);
    return it == counters.end() ? 0 : it->second;
  }
};

}  // namespace lpreg
