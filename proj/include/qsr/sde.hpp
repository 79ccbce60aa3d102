#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "qsr/models.hpp"

namespace qsr {

struct IntegratorConfig {
  double dt = 0.0;     // 0 selects default_dt(spec)
  double t_max = 0.0;
  bool renormalize_each_step = true;
  double collapse_epsilon = 1e-6;  // terminate once max_k <P_k> >= 1 - epsilon
  int record_stride = 1;
  bool stop_on_collapse = true;    // false keeps integrating to t_max (fixed-time laws)

  void validate() const;
};

// dt = 0.01 hbar/(coupling*system_size); colored runs additionally respect
// the tau/10 stability bound.
double default_dt(const ModelSpec& spec);

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<std::vector<double>> populations;  // [record][k]
  std::vector<double> norms;
  std::optional<int> outcome;            // collapsed basis group; nullopt = unresolved
  std::optional<double> collapse_time;
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;
};

// One Ito Euler-Maruyama step; increments are Gaussian(0, dt), one per channel.
Vector euler_maruyama_step(const ModelSpec& spec, const Vector& psi, double dt,
                           std::span<const double> increments, bool renormalize = false);

// One Stratonovich step: Euler predictor, then drift and diffusion evaluated
// at the midpoint (psi + predictor)/2.
Vector heun_step(const ModelSpec& spec, const Vector& psi, double dt,
                 std::span<const double> increments, bool renormalize = false);

// Advances the noise first, then psi by one RK4 step of the random ODE with
// each channel's noise frozen at the average of its step endpoints.
std::pair<Vector, ColoredNoiseState> colored_step(const ModelSpec& spec, const Vector& psi,
                                                  const ColoredNoiseState& xi, double dt,
                                                  std::span<RandomStream> streams,
                                                  bool renormalize = false);

// Steps a single trajectory. Fully determined by (spec, psi0, config,
// trajectory_index, master_seed): channel c draws from the stream with index
// hash64(trajectory_index, c), so results are independent of scheduling.
class TrajectoryEngine {
public:
  TrajectoryEngine(const ModelSpec& spec, const StateVector& psi0, const IntegratorConfig& config,
                   std::uint64_t trajectory_index, std::uint64_t master_seed);

  void advance();  // one step; no-op when finished
  bool finished() const { return finished_; }

  double t() const { return static_cast<double>(step_) * dt_; }
  double dt() const { return dt_; }
  const Vector& psi() const { return psi_; }
  void populations(std::vector<double>& out) const;
  std::optional<int> outcome() const { return outcome_; }
  std::optional<double> collapse_time() const { return collapse_time_; }
  std::uint64_t steps_taken() const { return step_; }

private:
  void check_collapse();

  const ModelSpec& spec_;
  IntegratorConfig config_;
  double dt_;
  std::uint64_t total_steps_;
  std::uint64_t step_ = 0;
  std::uint64_t trajectory_index_;
  std::uint64_t master_seed_;
  Vector psi_;
  std::vector<RandomStream> streams_;
  std::optional<ColoredNoiseState> xi_;
  std::vector<double> increments_;
  std::vector<double> pops_;
  std::optional<int> outcome_;
  std::optional<double> collapse_time_;
  bool finished_ = false;
};

TrajectoryRecord run_trajectory(const ModelSpec& spec, const StateVector& psi0,
                                const IntegratorConfig& config, std::uint64_t trajectory_index,
                                std::uint64_t master_seed);

}  // namespace qsr
