#include "qsr/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "qsr/suite.hpp"

namespace qsr {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::config_invalid, path + ": " + message);
}

void require_object(const json& node, const std::string& path) {
  if (!node.is_object()) config_error(path, "expected an object");
}

void reject_unknown(const json& node, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : node.items()) {
    bool known = false;
    for (const char* candidate : allowed) known = known || key == candidate;
    if (!known) config_error(path + "." + key, "unknown key");
  }
}

double get_number(const json& node, const std::string& path, const char* key, double fallback) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_number()) config_error(path + "." + key, "expected a number");
  return node[key].get<double>();
}

std::uint64_t get_uint(const json& node, const std::string& path, const char* key,
                       std::uint64_t fallback) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_number_unsigned()) config_error(path + "." + key, "expected a non-negative integer");
  return node[key].get<std::uint64_t>();
}

int get_int(const json& node, const std::string& path, const char* key, int fallback) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_number_integer()) config_error(path + "." + key, "expected an integer");
  return node[key].get<int>();
}

bool get_bool(const json& node, const std::string& path, const char* key, bool fallback) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_boolean()) config_error(path + "." + key, "expected a boolean");
  return node[key].get<bool>();
}

std::string get_string(const json& node, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_string()) config_error(path + "." + key, "expected a string");
  return node[key].get<std::string>();
}

Complex parse_complex(const json& node, const std::string& path) {
  if (node.is_number()) return Complex(node.get<double>(), 0.0);
  if (node.is_array() && node.size() == 2 && node[0].is_number() && node[1].is_number()) {
    return Complex(node[0].get<double>(), node[1].get<double>());
  }
  config_error(path, "expected a number or a [re, im] pair");
}

ModelVariant parse_variant(const std::string& name, const std::string& path) {
  for (ModelVariant v :
       {ModelVariant::two_state_stratonovich, ModelVariant::two_state_ito,
        ModelVariant::n_state_stratonovich, ModelVariant::n_state_ito,
        ModelVariant::colored_n_state}) {
    if (name == variant_name(v)) return v;
  }
  config_error(path, "unknown variant '" + name + "'");
}

NoiseKind parse_noise_kind(const std::string& name, const std::string& path) {
  if (name == "ou") return NoiseKind::ou;
  if (name == "sbm") return NoiseKind::sbm;
  config_error(path, "unknown noise kind '" + name + "' (expected 'ou' or 'sbm')");
}

// defer_noise_amplitude: leave an entirely unset colored-noise amplitude
// untouched (the homogenization sweep derives it per tau).
ModelSpec parse_model(const json& node, const std::string& path, bool defer_noise_amplitude) {
  require_object(node, path);
  reject_unknown(node, path,
                 {"variant", "dim", "projector_groups", "coupling", "system_size", "hbar",
                  "diffusion", "noise_coupling", "correlation_time", "noise_kind", "fdr",
                  "hamiltonian"});

  ModelSpec spec;
  spec.variant = parse_variant(get_string(node, path, "variant", "two_state_ito"), path + ".variant");

  int dim = get_int(node, path, "dim", 0);
  if (node.contains("projector_groups")) {
    const json& groups_node = node["projector_groups"];
    if (!groups_node.is_array() || groups_node.empty()) {
      config_error(path + ".projector_groups", "expected a non-empty array of index arrays");
    }
    std::vector<std::vector<int>> groups;
    int covered = 0;
    for (std::size_t k = 0; k < groups_node.size(); ++k) {
      const json& g = groups_node[k];
      if (!g.is_array()) {
        config_error(path + ".projector_groups[" + std::to_string(k) + "]", "expected an array");
      }
      std::vector<int> indices;
      for (const auto& idx : g) {
        if (!idx.is_number_integer()) {
          config_error(path + ".projector_groups[" + std::to_string(k) + "]",
                       "expected integer basis indices");
        }
        indices.push_back(idx.get<int>());
      }
      covered += static_cast<int>(indices.size());
      groups.push_back(std::move(indices));
    }
    if (dim == 0) dim = covered;
    if (dim != covered) {
      config_error(path + ".projector_groups",
                   "covers " + std::to_string(covered) + " indices but dim = " + std::to_string(dim));
    }
    spec.projectors = ProjectorSet::from_index_groups(dim, std::move(groups));
  } else {
    if (dim == 0) dim = 2;
    spec.projectors = ProjectorSet::canonical(dim);
  }

  spec.coupling = get_number(node, path, "coupling", 1.0);
  spec.system_size = get_number(node, path, "system_size", 1.0);
  spec.hbar = get_number(node, path, "hbar", 1.0);
  spec.diffusion = get_number(node, path, "diffusion", 0.0);
  spec.noise_coupling = get_number(node, path, "noise_coupling", 0.0);
  spec.correlation_time = get_number(node, path, "correlation_time", 0.0);
  spec.noise_kind = parse_noise_kind(get_string(node, path, "noise_kind", "ou"), path + ".noise_kind");

  if (node.contains("hamiltonian")) {
    const json& h_node = node["hamiltonian"];
    if (!h_node.is_array() || static_cast<int>(h_node.size()) != dim) {
      config_error(path + ".hamiltonian", "expected " + std::to_string(dim) + " rows");
    }
    Matrix h(dim, dim);
    for (int i = 0; i < dim; ++i) {
      if (!h_node[i].is_array() || static_cast<int>(h_node[i].size()) != dim) {
        config_error(path + ".hamiltonian[" + std::to_string(i) + "]",
                     "expected " + std::to_string(dim) + " entries");
      }
      for (int j = 0; j < dim; ++j) {
        h(i, j) = parse_complex(h_node[i][j], path + ".hamiltonian[" + std::to_string(i) + "][" +
                                                  std::to_string(j) + "]");
      }
    }
    try {
      spec.hamiltonian = HermitianOperator(std::move(h));
    } catch (const Error& e) {
      config_error(path + ".hamiltonian", e.what());
    }
  }

  const bool amplitude_unset = spec.variant == ModelVariant::colored_n_state &&
                               spec.diffusion == 0.0 && spec.noise_coupling == 0.0;
  if (get_bool(node, path, "fdr", true) && !(defer_noise_amplitude && amplitude_unset)) {
    spec = derive_fdr_params(std::move(spec));  // conflicts surface verbatim
  } else {
    spec.fdr_enforced = false;
  }
  spec.validate();
  return spec;
}

StateVector parse_psi0(const json* node, const std::string& path, int dim) {
  Vector v(dim);
  if (node == nullptr) {
    // Default initial state: (sqrt(0.8), sqrt(0.2)) on two levels, uniform
    // superposition otherwise.
    if (dim == 2) {
      v << std::sqrt(0.8), std::sqrt(0.2);
    } else {
      v.setConstant(Complex(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
    }
    return StateVector(v);
  }
  if (!node->is_array() || static_cast<int>(node->size()) != dim) {
    config_error(path, "expected " + std::to_string(dim) + " amplitudes");
  }
  for (int i = 0; i < dim; ++i) {
    v(i) = parse_complex((*node)[i], path + "[" + std::to_string(i) + "]");
  }
  try {
    return normalize(v);
  } catch (const Error& e) {
    config_error(path, e.what());
  }
}

std::vector<double> parse_number_list(const json& node, const std::string& path) {
  if (!node.is_array() || node.empty()) config_error(path, "expected a non-empty number array");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    if (!node[i].is_number()) config_error(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(node[i].get<double>());
  }
  return out;
}

bool needs_model(RunMode mode) {
  return mode == RunMode::trajectory || mode == RunMode::ensemble || mode == RunMode::master ||
         mode == RunMode::homogenize;
}

json complex_to_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

}  // namespace

const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::trajectory: return "trajectory";
    case RunMode::ensemble: return "ensemble";
    case RunMode::master: return "master";
    case RunMode::noise_validate: return "noise-validate";
    case RunMode::homogenize: return "homogenize";
    case RunMode::born_suite: return "born-suite";
  }
  return "unknown";
}

RunMode parse_run_mode(const std::string& name) {
  for (RunMode mode : {RunMode::trajectory, RunMode::ensemble, RunMode::master,
                       RunMode::noise_validate, RunMode::homogenize, RunMode::born_suite}) {
    if (name == run_mode_name(mode)) return mode;
  }
  throw Error(ErrorCode::config_invalid, "unknown mode '" + name + "'");
}

RunConfig parse_config(const std::string& json_text, const std::string& mode_override) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::config_invalid, std::string("JSON parse error: ") + e.what());
  }
  require_object(doc, "$");
  reject_unknown(doc, "$",
                 {"mode", "seed", "workers", "out_dir", "psi0", "model", "integrator", "master",
                  "ensemble", "homogenize", "noise"});

  RunConfig config;
  std::string mode_name = get_string(doc, "$", "mode", "");
  if (!mode_override.empty()) {
    if (!mode_name.empty() && mode_name != mode_override) {
      config_error("$.mode", "config says '" + mode_name + "' but the subcommand is '" +
                                 mode_override + "'");
    }
    mode_name = mode_override;
  }
  if (mode_name.empty()) config_error("$.mode", "missing (or pass a subcommand)");
  config.mode = parse_run_mode(mode_name);

  config.master_seed = get_uint(doc, "$", "seed", 1);
  config.workers = get_int(doc, "$", "workers", 0);
  if (config.workers < 0) config_error("$.workers", "must be >= 0 (0 = auto)");
  config.out_dir = get_string(doc, "$", "out_dir", "out");

  if (needs_model(config.mode)) {
    const bool defer = config.mode == RunMode::homogenize;
    if (doc.contains("model")) {
      config.model = parse_model(doc["model"], "$.model", defer);
    } else {
      json empty = json::object();
      config.model = parse_model(empty, "$.model", defer);
    }
    if (config.mode == RunMode::homogenize &&
        config.model.variant != ModelVariant::colored_n_state) {
      config_error("$.model.variant", "homogenize requires the colored_n_state variant");
    }
    config.psi0 = parse_psi0(doc.contains("psi0") ? &doc["psi0"] : nullptr, "$.psi0",
                             config.model.dim());

    const bool has_rate = config.model.coupling > 0.0;
    const double scale = has_rate ? config.model.hbar / (config.model.coupling * config.model.system_size)
                                  : 0.0;

    const json integrator_node =
        doc.contains("integrator") ? doc["integrator"] : json::object();
    require_object(integrator_node, "$.integrator");
    reject_unknown(integrator_node, "$.integrator",
                   {"dt", "t_max", "renormalize_each_step", "collapse_epsilon", "record_stride"});
    config.integrator.dt = get_number(integrator_node, "$.integrator", "dt",
                                      config.mode == RunMode::homogenize && has_rate ? 1e-3 * scale : 0.0);
    const double default_t_max =
        has_rate ? (config.mode == RunMode::homogenize ? 0.5 * scale : 25.0 * scale) : 0.0;
    config.integrator.t_max = get_number(integrator_node, "$.integrator", "t_max", default_t_max);
    if (!(config.integrator.t_max > 0.0)) {
      config_error("$.integrator.t_max", "required when coupling is 0");
    }
    config.integrator.renormalize_each_step =
        get_bool(integrator_node, "$.integrator", "renormalize_each_step", true);
    config.integrator.collapse_epsilon =
        get_number(integrator_node, "$.integrator", "collapse_epsilon", 1e-6);
    config.integrator.record_stride = get_int(integrator_node, "$.integrator", "record_stride", 1);
    try {
      config.integrator.validate();
    } catch (const Error& e) {
      config_error("$.integrator", e.what());
    }
    if (config.integrator.dt == 0.0) {
      if (!has_rate) config_error("$.integrator.dt", "required when coupling is 0");
      config.integrator.dt = default_dt(config.model);
    }

    const json master_node = doc.contains("master") ? doc["master"] : json::object();
    require_object(master_node, "$.master");
    reject_unknown(master_node, "$.master", {"dt", "t_max", "record_stride"});
    config.master.dt = get_number(master_node, "$.master", "dt", 1e-4);
    config.master.t_max = get_number(master_node, "$.master", "t_max", has_rate ? scale : 1.0);
    config.master.record_stride = get_int(master_node, "$.master", "record_stride", 10);
    try {
      config.master.validate();
    } catch (const Error& e) {
      config_error("$.master", e.what());
    }

    const json ensemble_node = doc.contains("ensemble") ? doc["ensemble"] : json::object();
    require_object(ensemble_node, "$.ensemble");
    reject_unknown(ensemble_node, "$.ensemble", {"m", "checkpoints"});
    if (config.mode == RunMode::homogenize) {
      config.m = get_uint(ensemble_node, "$.ensemble", "m", 2000);
    } else {
      config.m = get_uint(ensemble_node, "$.ensemble", "m", 5000);
    }
    if (config.m < 1) config_error("$.ensemble.m", "must be >= 1");
    if (ensemble_node.contains("checkpoints")) {
      config.checkpoints = parse_number_list(ensemble_node["checkpoints"], "$.ensemble.checkpoints");
    } else if (config.mode == RunMode::ensemble && has_rate) {
      config.checkpoints = {0.25 * scale, 0.5 * scale, 1.0 * scale};
    }

    const json homog_node = doc.contains("homogenize") ? doc["homogenize"] : json::object();
    require_object(homog_node, "$.homogenize");
    reject_unknown(homog_node, "$.homogenize", {"tau_list", "m", "repetitions"});
    config.homogenize_repetitions = get_int(homog_node, "$.homogenize", "repetitions", 1);
    if (config.homogenize_repetitions < 1) config_error("$.homogenize.repetitions", "must be >= 1");
    if (homog_node.contains("m")) config.m = get_uint(homog_node, "$.homogenize", "m", config.m);
    if (homog_node.contains("tau_list")) {
      config.tau_list = parse_number_list(homog_node["tau_list"], "$.homogenize.tau_list");
    } else if (config.mode == RunMode::homogenize) {
      if (!has_rate) config_error("$.homogenize.tau_list", "required when coupling is 0");
      config.tau_list = {0.1 * scale, 0.03 * scale, 0.01 * scale};
    }
  } else {
    for (const char* irrelevant : {"model", "psi0", "integrator", "master", "ensemble", "homogenize"}) {
      if (doc.contains(irrelevant)) {
        config_error(std::string("$.") + irrelevant,
                     std::string("not accepted in mode '") + run_mode_name(config.mode) + "'");
      }
    }
  }

  if (config.mode == RunMode::noise_validate) {
    const json noise_node = doc.contains("noise") ? doc["noise"] : json::object();
    require_object(noise_node, "$.noise");
    reject_unknown(noise_node, "$.noise", {"kind", "tau", "dt", "steps", "max_lag", "bins"});
    config.noise.kind = parse_noise_kind(get_string(noise_node, "$.noise", "kind", "ou"), "$.noise.kind");
    config.noise.tau = get_number(noise_node, "$.noise", "tau", 1.0);
    if (!(config.noise.tau > 0.0)) config_error("$.noise.tau", "must be > 0");
    config.noise.dt = get_number(noise_node, "$.noise", "dt", config.noise.tau / 100.0);
    if (!(config.noise.dt > 0.0)) config_error("$.noise.dt", "must be > 0");
    config.noise.steps = get_uint(noise_node, "$.noise", "steps", 1'000'000);
    if (config.noise.steps < 1000) config_error("$.noise.steps", "must be >= 1000");
    config.noise.max_lag = get_number(noise_node, "$.noise", "max_lag", 3.0 * config.noise.tau);
    if (!(config.noise.max_lag > 0.0)) config_error("$.noise.max_lag", "must be > 0");
    config.noise.bins = get_int(noise_node, "$.noise", "bins", 20);
    if (config.noise.bins < 2) config_error("$.noise.bins", "must be >= 2");
  } else if (doc.contains("noise")) {
    config_error("$.noise", std::string("not accepted in mode '") + run_mode_name(config.mode) + "'");
  }

  return config;
}

std::string canonical_json(const RunConfig& config) {
  // Worker count and output directory are execution details: they are
  // excluded so outputs and fingerprints are identical at any parallelism.
  json doc;
  doc["mode"] = run_mode_name(config.mode);
  doc["seed"] = config.master_seed;

  if (needs_model(config.mode)) {
    json model;
    model["variant"] = variant_name(config.model.variant);
    model["dim"] = config.model.dim();
    json groups = json::array();
    for (int k = 0; k < config.model.projectors.size(); ++k) {
      groups.push_back(config.model.projectors.indices(k));
    }
    model["projector_groups"] = groups;
    model["coupling"] = config.model.coupling;
    model["system_size"] = config.model.system_size;
    model["hbar"] = config.model.hbar;
    model["diffusion"] = config.model.diffusion;
    model["noise_coupling"] = config.model.noise_coupling;
    model["correlation_time"] = config.model.correlation_time;
    model["noise_kind"] = noise_kind_name(config.model.noise_kind);
    model["fdr"] = config.model.fdr_enforced;
    if (config.model.hamiltonian) {
      json h = json::array();
      for (int i = 0; i < config.model.dim(); ++i) {
        json row = json::array();
        for (int j = 0; j < config.model.dim(); ++j) {
          row.push_back(complex_to_json(config.model.hamiltonian->mat()(i, j)));
        }
        h.push_back(row);
      }
      model["hamiltonian"] = h;
    }
    doc["model"] = model;

    json psi0 = json::array();
    for (int i = 0; i < config.psi0.dim(); ++i) psi0.push_back(complex_to_json(config.psi0[i]));
    doc["psi0"] = psi0;

    if (config.mode != RunMode::master) {
      doc["integrator"] = {{"dt", config.integrator.dt},
                           {"t_max", config.integrator.t_max},
                           {"renormalize_each_step", config.integrator.renormalize_each_step},
                           {"collapse_epsilon", config.integrator.collapse_epsilon},
                           {"record_stride", config.integrator.record_stride}};
    }
    if (config.mode == RunMode::master) {
      doc["master"] = {{"dt", config.master.dt},
                       {"t_max", config.master.t_max},
                       {"record_stride", config.master.record_stride}};
    }
    if (config.mode == RunMode::ensemble) {
      doc["ensemble"] = {{"m", config.m}, {"checkpoints", config.checkpoints}};
    }
    if (config.mode == RunMode::homogenize) {
      doc["homogenize"] = {{"tau_list", config.tau_list},
                           {"m", config.m},
                           {"repetitions", config.homogenize_repetitions}};
    }
  }

  if (config.mode == RunMode::noise_validate) {
    doc["noise"] = {{"kind", noise_kind_name(config.noise.kind)},
                    {"tau", config.noise.tau},
                    {"dt", config.noise.dt},
                    {"steps", config.noise.steps},
                    {"max_lag", config.noise.max_lag},
                    {"bins", config.noise.bins}};
  }

  return doc.dump(2) + "\n";
}

std::string RunConfig::fingerprint() const { return hex64(fnv1a64(canonical_json(*this))); }

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

class OutputFile {
public:
  OutputFile(const std::filesystem::path& path, const std::string& fingerprint, bool csv_header)
      : path_(path), stream_(path) {
    if (!stream_) {
      throw Error(ErrorCode::io_failure, "cannot open " + path.string() + " for writing");
    }
    if (csv_header) {
      stream_ << "# version=" << kVersion << "\n# fingerprint=" << fingerprint << "\n";
    }
  }

  std::ofstream& stream() { return stream_; }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
  std::ofstream stream_;
};

std::filesystem::path output_path(const RunConfig& config, const std::string& suffix) {
  return std::filesystem::path(config.out_dir) /
         (std::string(run_mode_name(config.mode)) + "_" + config.fingerprint() + suffix);
}

void write_json_file(const RunConfig& config, const std::string& suffix, json payload,
                     std::ostream& log) {
  payload["version"] = kVersion;
  payload["fingerprint"] = config.fingerprint();
  OutputFile file(output_path(config, suffix), config.fingerprint(), false);
  file.stream() << payload.dump(2) << "\n";
  log << "wrote " << file.path().string() << "\n";
}

int execute_trajectory(const RunConfig& config, std::ostream& log) {
  const TrajectoryRecord record =
      run_trajectory(config.model, config.psi0, config.integrator, 0, config.master_seed);

  OutputFile csv(output_path(config, ".csv"), config.fingerprint(), true);
  csv.stream() << "t";
  for (int k = 0; k < config.model.projectors.size(); ++k) csv.stream() << ",pop_" << k;
  csv.stream() << ",norm\n";
  for (std::size_t i = 0; i < record.times.size(); ++i) {
    csv.stream() << fmt17(record.times[i]);
    for (double p : record.populations[i]) csv.stream() << "," << fmt17(p);
    csv.stream() << "," << fmt17(record.norms[i]) << "\n";
  }
  log << "wrote " << csv.path().string() << "\n";

  json sidecar = {{"outcome", record.outcome ? json(*record.outcome) : json("unresolved")},
                  {"collapse_time", record.collapse_time ? json(*record.collapse_time) : json()},
                  {"master_seed", record.master_seed},
                  {"trajectory_index", record.trajectory_index},
                  {"variant", variant_name(config.model.variant)}};
  write_json_file(config, ".json", sidecar, log);

  log << "outcome: "
      << (record.outcome ? "state " + std::to_string(*record.outcome) : std::string("unresolved"))
      << "\n";
  return 0;
}

int execute_ensemble(const RunConfig& config, std::ostream& log) {
  const EnsembleSummary summary = run_ensemble(config.model, config.psi0, config.integrator,
                                               config.m, config.master_seed, config.checkpoints,
                                               config.workers);
  log << "ensemble of " << summary.m_trajectories << " trajectories, " << summary.unresolved_count
      << " unresolved, wall time " << summary.wall_time_seconds << " s\n";

  json payload = {{"m", summary.m_trajectories},
                  {"outcome_counts", summary.outcome_counts},
                  {"unresolved", summary.unresolved_count},
                  {"checkpoint_times", summary.checkpoint_times},
                  {"checkpoint_means", summary.checkpoint_means},
                  {"checkpoint_stddevs", summary.checkpoint_stddevs},
                  {"master_seed", summary.master_seed}};

  bool checks_pass = true;
  try {
    const BornCheck born = born_check(summary, config.psi0);
    payload["born_check"] = {{"observed", born.observed},
                             {"expected", born.expected},
                             {"margin_3sigma", born.margin},
                             {"pass", born.pass}};
    checks_pass = checks_pass && born.pass;
  } catch (const Error& e) {
    payload["born_check"] = {{"error", e.what()}};
  }
  if (!summary.checkpoint_times.empty()) {
    const MartingaleCheck martingale = martingale_check(summary, config.psi0);
    payload["martingale_check"] = {{"checkpoint_times", martingale.checkpoint_times},
                                   {"mean", martingale.mean},
                                   {"band_3sigma", martingale.band},
                                   {"expected", martingale.expected},
                                   {"pass", martingale.pass}};
    checks_pass = checks_pass && martingale.pass;
  }
  write_json_file(config, ".json", payload, log);
  return checks_pass ? 0 : 1;
}

int execute_master(const RunConfig& config, std::ostream& log) {
  const DensityMatrix rho0 = pure_projector(config.psi0);
  const MasterSeries series = integrate_master(config.model, rho0, config.master);

  OutputFile csv(output_path(config, ".csv"), config.fingerprint(), true);
  const int n = config.model.dim();
  csv.stream() << "t";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      csv.stream() << ",re_rho_" << i << "_" << j << ",im_rho_" << i << "_" << j;
    }
  }
  csv.stream() << ",purity\n";
  for (std::size_t s = 0; s < series.times.size(); ++s) {
    csv.stream() << fmt17(series.times[s]);
    const Matrix& rho = series.states[s].mat();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        csv.stream() << "," << fmt17(rho(i, j).real()) << "," << fmt17(rho(i, j).imag());
      }
    }
    csv.stream() << "," << fmt17(series.states[s].purity()) << "\n";
  }
  log << "wrote " << csv.path().string() << " (" << series.times.size() << " snapshots)\n";
  return 0;
}

int execute_noise_validate(const RunConfig& config, std::ostream& log) {
  const NoiseValidateConfig& nv = config.noise;
  std::vector<RandomStream> streams{RandomStream::derive(config.master_seed, 0)};
  ColoredNoiseState state;
  state.kind = nv.kind;
  state.correlation_time = nv.tau;
  state.xi = {stationary_sample(nv.kind, streams[0])};

  const auto burn = static_cast<std::uint64_t>(std::llround(20.0 * nv.tau / nv.dt));
  for (std::uint64_t i = 0; i < burn; ++i) colored_noise_step(state, nv.dt, streams);
  std::vector<double> path(nv.steps);
  for (auto& v : path) {
    colored_noise_step(state, nv.dt, streams);
    v = state.xi[0];
  }

  const auto acf = autocorrelation_estimate(path, nv.dt, nv.max_lag);
  const double c0 = nv.kind == NoiseKind::ou ? 1.0 : 1.0 / 3.0;
  OutputFile autocorr_csv(output_path(config, "_autocorr.csv"), config.fingerprint(), true);
  autocorr_csv.stream() << "lag,empirical_autocorr,analytic_autocorr\n";
  for (const auto& [lag, value] : acf) {
    autocorr_csv.stream() << fmt17(lag) << "," << fmt17(value) << ","
                          << fmt17(c0 * std::exp(-lag / nv.tau)) << "\n";
  }
  log << "wrote " << autocorr_csv.path().string() << "\n";

  // Density histogram from decorrelated subsamples.
  const auto stride = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(3.0 * nv.tau / nv.dt));
  std::vector<double> samples;
  for (std::uint64_t i = 0; i < path.size(); i += stride) samples.push_back(path[i]);
  const double lo = nv.kind == NoiseKind::ou ? -4.0 : -1.0;
  const double hi = -lo;
  const double width = (hi - lo) / nv.bins;
  std::vector<double> counts(nv.bins, 0.0);
  std::size_t used = 0;
  for (double v : samples) {
    if (v < lo || v > hi) continue;
    counts[std::min(nv.bins - 1, static_cast<int>((v - lo) / width))] += 1.0;
    ++used;
  }
  OutputFile density_csv(output_path(config, "_density.csv"), config.fingerprint(), true);
  density_csv.stream() << "bin_center,empirical_density,analytic_density\n";
  for (int b = 0; b < nv.bins; ++b) {
    const double center = lo + (b + 0.5) * width;
    const double empirical = counts[b] / static_cast<double>(used) / width;
    const double analytic = nv.kind == NoiseKind::ou
                                ? std::exp(-0.5 * center * center) / std::sqrt(2.0 * 3.14159265358979323846)
                                : 0.5;
    density_csv.stream() << fmt17(center) << "," << fmt17(empirical) << "," << fmt17(analytic)
                         << "\n";
  }
  log << "wrote " << density_csv.path().string() << "\n";

  json payload = {{"kind", noise_kind_name(nv.kind)},
                  {"tau", nv.tau},
                  {"dt", nv.dt},
                  {"steps", nv.steps},
                  {"density_samples", samples.size()}};
  bool pass = true;
  if (nv.kind == NoiseKind::sbm) {
    const ChiSquareResult uniform = chi_square_uniform(samples, -1.0, 1.0, nv.bins);
    payload["uniform_chi_square"] = {{"statistic", uniform.statistic},
                                     {"critical", uniform.critical_value},
                                     {"pass", uniform.pass}};
    pass = uniform.pass;
  } else {
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    var /= static_cast<double>(samples.size());
    payload["stationary_variance"] = {{"value", var}, {"expected", 1.0}, {"tolerance", 0.02}};
    pass = std::abs(var - 1.0) < 0.02;
    payload["stationary_variance"]["pass"] = pass;
  }
  write_json_file(config, ".json", payload, log);
  return pass ? 0 : 1;
}

int execute_homogenize(const RunConfig& config, std::ostream& log) {
  const HomogenizationResult result =
      homogenization_sweep(config.model, config.psi0, config.tau_list, config.integrator, config.m,
                           config.master_seed, config.workers, config.homogenize_repetitions);

  OutputFile csv(output_path(config, ".csv"), config.fingerprint(), true);
  csv.stream() << "tau,noise_coupling,ks_statistic,ks_mean,ks_critical,pass\n";
  for (std::size_t i = 0; i < result.tau_list.size(); ++i) {
    csv.stream() << fmt17(result.tau_list[i]) << "," << fmt17(result.noise_couplings[i]) << ","
                 << fmt17(result.ks[i].statistic) << "," << fmt17(result.mean_ks[i]) << ","
                 << fmt17(result.ks[i].critical_value) << "," << (result.ks[i].pass ? 1 : 0)
                 << "\n";
  }
  log << "wrote " << csv.path().string() << "\n";

  json sweep = json::array();
  for (std::size_t i = 0; i < result.tau_list.size(); ++i) {
    sweep.push_back({{"tau", result.tau_list[i]},
                     {"noise_coupling", result.noise_couplings[i]},
                     {"ks_statistic", result.ks[i].statistic},
                     {"ks_mean", result.mean_ks[i]},
                     {"ks_critical", result.ks[i].critical_value},
                     {"pass", result.ks[i].pass}});
  }
  json payload = {{"noise_kind", noise_kind_name(config.model.noise_kind)},
                  {"diffusion", result.diffusion},
                  {"m", config.m},
                  {"repetitions", result.repetitions},
                  {"sweep", sweep},
                  {"strictly_decreasing", result.strictly_decreasing},
                  {"smallest_tau_pass", result.smallest_tau_pass}};
  write_json_file(config, ".json", payload, log);
  return (result.strictly_decreasing && result.smallest_tau_pass) ? 0 : 1;
}

int execute_born_suite(const RunConfig& config, std::ostream& log) {
  const SuiteReport report = run_acceptance_suite(config.master_seed, config.workers, &log);
  json payload = suite_report_to_json(report);
  write_json_file(config, ".json", payload, log);
  log << (report.all_pass ? "all checks passed" : "CHECK FAILURES PRESENT") << " (wall time "
      << report.wall_time_seconds << " s)\n";
  return report.all_pass ? 0 : 1;
}

}  // namespace

int execute(const RunConfig& config, std::ostream& log) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::io_failure,
                "cannot create output directory " + config.out_dir + ": " + ec.message());
  }

  switch (config.mode) {
    case RunMode::trajectory: return execute_trajectory(config, log);
    case RunMode::ensemble: return execute_ensemble(config, log);
    case RunMode::master: return execute_master(config, log);
    case RunMode::noise_validate: return execute_noise_validate(config, log);
    case RunMode::homogenize: return execute_homogenize(config, log);
    case RunMode::born_suite: return execute_born_suite(config, log);
  }
  throw Error(ErrorCode::invalid_argument, "unknown mode");
}

}  // namespace qsr
