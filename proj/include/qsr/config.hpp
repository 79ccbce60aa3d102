#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "qsr/master.hpp"
#include "qsr/sde.hpp"
#include "qsr/stats.hpp"

namespace qsr {

enum class RunMode { trajectory, ensemble, master, noise_validate, homogenize, born_suite };

const char* run_mode_name(RunMode mode);
RunMode parse_run_mode(const std::string& name);

struct NoiseValidateConfig {
  NoiseKind kind = NoiseKind::ou;
  double tau = 1.0;
  double dt = 0.01;
  std::uint64_t steps = 1'000'000;
  double max_lag = 3.0;
  int bins = 20;
};

// Fully validated run description. Built from a JSON document (unknown keys
// rejected, defaults materialized) and serializable back to a canonical form
// whose round-trip is the identity.
struct RunConfig {
  RunMode mode = RunMode::ensemble;
  std::uint64_t master_seed = 1;
  int workers = 0;  // 0 = hardware concurrency
  std::string out_dir = "out";

  ModelSpec model;
  StateVector psi0{[] {
    Vector v(2);
    v << 1.0, 0.0;
    return v;
  }()};
  IntegratorConfig integrator;
  MasterConfig master;
  std::uint64_t m = 5000;
  std::vector<double> checkpoints;
  std::vector<double> tau_list;
  int homogenize_repetitions = 1;
  NoiseValidateConfig noise;

  std::string fingerprint() const;  // hash of the canonical form
};

// Parses and validates a JSON document. Errors carry the JSON path of the
// offending key. `mode_override`, when nonempty, must agree with any mode
// present in the document.
RunConfig parse_config(const std::string& json_text, const std::string& mode_override = "");

// Canonical JSON: relevant keys only, defaults materialized, sorted keys.
std::string canonical_json(const RunConfig& config);

// Runs the configured mode and writes its output files under out_dir.
// Returns 0 on success, 1 if the run completed but a verification check
// failed. Engine errors propagate as qsr::Error.
int execute(const RunConfig& config, std::ostream& log);

}  // namespace qsr
