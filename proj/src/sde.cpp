#include "qsr/sde.hpp"

#include <algorithm>
#include <cmath>

namespace qsr {

namespace {

void require_increments(const TermPair& terms, std::span<const double> increments) {
  if (increments.size() != terms.diffusion.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "expected " + std::to_string(terms.diffusion.size()) + " Wiener increments, got " +
                    std::to_string(increments.size()));
  }
}

}  // namespace

void IntegratorConfig::validate() const {
  if (dt < 0.0) throw Error(ErrorCode::invalid_state, "integrator dt must be >= 0 (0 = auto)");
  if (!(t_max > 0.0)) throw Error(ErrorCode::invalid_state, "integrator t_max must be > 0");
  if (!(collapse_epsilon > 0.0 && collapse_epsilon < 0.5)) {
    throw Error(ErrorCode::invalid_state, "collapse_epsilon must lie in (0, 0.5)");
  }
  if (record_stride < 1) throw Error(ErrorCode::invalid_state, "record_stride must be >= 1");
}

double default_dt(const ModelSpec& spec) {
  if (!(spec.coupling > 0.0)) {
    throw Error(ErrorCode::invalid_argument,
                "default dt undefined for zero coupling; set dt explicitly");
  }
  double dt = 0.01 * spec.hbar / (spec.coupling * spec.system_size);
  if (spec.is_colored()) dt = std::min(dt, spec.correlation_time / 10.0);
  return dt;
}

Vector euler_maruyama_step(const ModelSpec& spec, const Vector& psi, double dt,
                           std::span<const double> increments, bool renormalize) {
  TermPair terms = model_terms(spec, psi);
  if (terms.convention != StochasticConvention::ito) {
    throw Error(ErrorCode::invalid_argument,
                "euler_maruyama_step requires an Ito-flagged variant; use heun_step for " +
                    std::string(variant_name(spec.variant)));
  }
  require_increments(terms, increments);
  Vector out = psi + terms.drift * dt;
  for (std::size_t k = 0; k < increments.size(); ++k) {
    out += terms.diffusion[k] * increments[k];
  }
  return renormalize ? normalize_vector(out) : out;
}

Vector heun_step(const ModelSpec& spec, const Vector& psi, double dt,
                 std::span<const double> increments, bool renormalize) {
  TermPair terms = model_terms(spec, psi);
  if (terms.convention != StochasticConvention::stratonovich) {
    throw Error(ErrorCode::invalid_argument,
                "heun_step requires a Stratonovich-flagged variant; use euler_maruyama_step for " +
                    std::string(variant_name(spec.variant)));
  }
  require_increments(terms, increments);

  Vector predictor = psi + terms.drift * dt;
  for (std::size_t k = 0; k < increments.size(); ++k) {
    predictor += terms.diffusion[k] * increments[k];
  }
  const Vector midpoint = 0.5 * (psi + predictor);

  TermPair mid_terms = model_terms(spec, midpoint);
  Vector out = psi + mid_terms.drift * dt;
  for (std::size_t k = 0; k < increments.size(); ++k) {
    out += mid_terms.diffusion[k] * increments[k];
  }
  return renormalize ? normalize_vector(out) : out;
}

std::pair<Vector, ColoredNoiseState> colored_step(const ModelSpec& spec, const Vector& psi,
                                                  const ColoredNoiseState& xi, double dt,
                                                  std::span<RandomStream> streams,
                                                  bool renormalize) {
  if (spec.variant != ModelVariant::colored_n_state) {
    throw Error(ErrorCode::invalid_argument, "colored_step requires the colored variant");
  }
  const double tau = spec.correlation_time;
  if (!(dt > 0.0) || dt > tau / 10.0 * (1.0 + 1e-12)) {
    throw Error(ErrorCode::step_constraint,
                "colored_step requires 0 < dt <= tau/10 = " + std::to_string(tau / 10.0) +
                    ", got dt = " + std::to_string(dt));
  }

  ColoredNoiseState xi_new = xi;
  colored_noise_step(xi_new, dt, streams);

  ColoredNoiseState xi_mid = xi;
  for (std::size_t c = 0; c < xi_mid.xi.size(); ++c) {
    xi_mid.xi[c] = 0.5 * (xi.xi[c] + xi_new.xi[c]);
  }

  const Vector k1 = colored_derivative(spec, psi, xi_mid);
  const Vector k2 = colored_derivative(spec, psi + (0.5 * dt) * k1, xi_mid);
  const Vector k3 = colored_derivative(spec, psi + (0.5 * dt) * k2, xi_mid);
  const Vector k4 = colored_derivative(spec, psi + dt * k3, xi_mid);
  Vector out = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (renormalize) out = normalize_vector(out);
  return {std::move(out), std::move(xi_new)};
}

TrajectoryEngine::TrajectoryEngine(const ModelSpec& spec, const StateVector& psi0,
                                   const IntegratorConfig& config, std::uint64_t trajectory_index,
                                   std::uint64_t master_seed)
    : spec_(spec),
      config_(config),
      trajectory_index_(trajectory_index),
      master_seed_(master_seed),
      psi_(psi0.vec()) {
  spec_.validate();
  config_.validate();
  if (psi0.dim() != spec_.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "initial state dim does not match model");
  }

  dt_ = config_.dt > 0.0 ? config_.dt : default_dt(spec_);
  total_steps_ = static_cast<std::uint64_t>(std::llround(config_.t_max / dt_));
  if (total_steps_ == 0) total_steps_ = 1;

  const int n_channels = spec_.channels();
  streams_.reserve(n_channels);
  for (int c = 0; c < n_channels; ++c) {
    streams_.push_back(RandomStream::derive(master_seed_, hash64(trajectory_index_, c)));
  }
  increments_.resize(n_channels);

  if (spec_.is_colored()) {
    xi_ = ColoredNoiseState::stationary(spec_.noise_kind, spec_.correlation_time, n_channels,
                                        streams_);
  }

  check_collapse();
  if (outcome_ && config_.stop_on_collapse) finished_ = true;
}

void TrajectoryEngine::check_collapse() {
  spec_.projectors.populations(psi_, pops_);
  const double n2 = psi_.squaredNorm();
  int argmax = 0;
  double best = pops_[0];
  for (std::size_t k = 1; k < pops_.size(); ++k) {
    if (pops_[k] > best) {  // ties resolve to the lowest index
      best = pops_[k];
      argmax = static_cast<int>(k);
    }
  }
  if (!outcome_ && best / n2 >= 1.0 - config_.collapse_epsilon) {
    outcome_ = argmax;
    collapse_time_ = t();
  }
}

void TrajectoryEngine::advance() {
  if (finished_) return;

  if (spec_.is_colored()) {
    auto [next, xi_next] = colored_step(spec_, psi_, *xi_, dt_, streams_,
                                        config_.renormalize_each_step);
    psi_ = std::move(next);
    *xi_ = std::move(xi_next);
  } else {
    for (std::size_t c = 0; c < streams_.size(); ++c) {
      increments_[c] = wiener_increment(dt_, streams_[c]);
    }
    if (spec_.convention() == StochasticConvention::stratonovich) {
      psi_ = heun_step(spec_, psi_, dt_, increments_, config_.renormalize_each_step);
    } else {
      psi_ = euler_maruyama_step(spec_, psi_, dt_, increments_, config_.renormalize_each_step);
    }
  }
  ++step_;

  if (!psi_.allFinite()) {
    throw Error(ErrorCode::numerical_failure,
                "non-finite state at step " + std::to_string(step_) + " (trajectory " +
                    std::to_string(trajectory_index_) + ", master_seed " +
                    std::to_string(master_seed_) + ")");
  }

  check_collapse();
  if ((outcome_ && config_.stop_on_collapse) || step_ >= total_steps_) finished_ = true;
}

void TrajectoryEngine::populations(std::vector<double>& out) const {
  spec_.projectors.populations(psi_, out);
  const double n2 = psi_.squaredNorm();
  if (n2 != 1.0) {
    for (double& p : out) p /= n2;
  }
}

TrajectoryRecord run_trajectory(const ModelSpec& spec, const StateVector& psi0,
                                const IntegratorConfig& config, std::uint64_t trajectory_index,
                                std::uint64_t master_seed) {
  TrajectoryEngine engine(spec, psi0, config, trajectory_index, master_seed);

  TrajectoryRecord record;
  record.master_seed = master_seed;
  record.trajectory_index = trajectory_index;

  std::vector<double> pops;
  auto emit = [&]() {
    engine.populations(pops);
    record.times.push_back(engine.t());
    record.populations.push_back(pops);
    record.norms.push_back(engine.psi().norm());
  };

  emit();
  while (!engine.finished()) {
    engine.advance();
    if (engine.steps_taken() % static_cast<std::uint64_t>(config.record_stride) == 0 ||
        engine.finished()) {
      emit();
    }
  }

  record.outcome = engine.outcome();
  record.collapse_time = engine.collapse_time();
  return record;
}

}  // namespace qsr
