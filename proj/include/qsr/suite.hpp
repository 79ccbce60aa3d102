#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsr/stats.hpp"

namespace qsr {

inline constexpr const char* kVersion = "qsr 0.1.0";

struct CheckResult {
  std::string id;
  std::string description;
  double statistic = 0.0;     // headline number for the report
  std::string threshold;      // human-readable bound the statistic was held to
  bool pass = false;
  nlohmann::json details;
};

struct SuiteReport {
  std::vector<CheckResult> checks;
  bool all_pass = false;
  std::uint64_t master_seed = 0;
  double wall_time_seconds = 0.0;  // excluded from serialization
};

// The full verification suite: Born statistics, martingale diagonals,
// dephasing decay against the closed form, linearity, noise oracles,
// the homogenization sweep, energy conservation, FDR necessity, and the
// structural identities. Stochastic checks use streams derived from
// master_seed, so reruns are deterministic. Progress lines go to `progress`
// when given.
SuiteReport run_acceptance_suite(std::uint64_t master_seed, int workers,
                                 std::ostream* progress = nullptr);

nlohmann::json suite_report_to_json(const SuiteReport& report);

}  // namespace qsr
