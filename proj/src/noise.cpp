#include "qsr/noise.hpp"

#include <algorithm>
#include <cmath>

namespace qsr {

const char* noise_kind_name(NoiseKind kind) {
  return kind == NoiseKind::ou ? "ou" : "sbm";
}

double wiener_increment(double dt, RandomStream& stream) {
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::invalid_argument,
                "wiener_increment requires dt > 0, got " + std::to_string(dt));
  }
  return std::sqrt(dt) * stream.gaussian();
}

ColoredNoiseState ColoredNoiseState::stationary(NoiseKind kind, double correlation_time,
                                                int channels, std::span<RandomStream> streams) {
  if (channels < 1 || streams.size() != static_cast<std::size_t>(channels)) {
    throw Error(ErrorCode::dimension_mismatch, "need one stream per noise channel");
  }
  ColoredNoiseState state;
  state.kind = kind;
  state.correlation_time = correlation_time;
  state.xi.resize(channels);
  for (int c = 0; c < channels; ++c) state.xi[c] = stationary_sample(kind, streams[c]);
  state.validate();
  return state;
}

void ColoredNoiseState::validate() const {
  if (!(correlation_time > 0.0)) {
    throw Error(ErrorCode::invalid_state, "colored noise requires correlation_time > 0");
  }
  if (kind == NoiseKind::sbm) {
    for (double v : xi) {
      if (v < -1.0 || v > 1.0) {
        throw Error(ErrorCode::invalid_state,
                    "SBM noise value " + std::to_string(v) + " outside [-1, 1]");
      }
    }
  }
}

void ou_step(ColoredNoiseState& state, double dt, std::span<RandomStream> streams) {
  if (state.kind != NoiseKind::ou) {
    throw Error(ErrorCode::invalid_argument, "ou_step on non-OU noise state");
  }
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "ou_step requires dt > 0");
  }
  if (streams.size() != state.xi.size()) {
    throw Error(ErrorCode::dimension_mismatch, "need one stream per noise channel");
  }
  const double decay = std::exp(-dt / state.correlation_time);
  const double amp = std::sqrt(1.0 - decay * decay);
  for (std::size_t c = 0; c < state.xi.size(); ++c) {
    state.xi[c] = state.xi[c] * decay + amp * streams[c].gaussian();
  }
}

void sbm_step(ColoredNoiseState& state, double dt, std::span<RandomStream> streams) {
  if (state.kind != NoiseKind::sbm) {
    throw Error(ErrorCode::invalid_argument, "sbm_step on non-SBM noise state");
  }
  const double tau = state.correlation_time;
  if (!(dt > 0.0) || dt > tau / 10.0 * (1.0 + 1e-12)) {
    throw Error(ErrorCode::step_constraint,
                "sbm_step stability bound violated: dt = " + std::to_string(dt) +
                    " must satisfy 0 < dt <= tau/10 = " + std::to_string(tau / 10.0));
  }
  if (streams.size() != state.xi.size()) {
    throw Error(ErrorCode::dimension_mismatch, "need one stream per noise channel");
  }
  for (std::size_t c = 0; c < state.xi.size(); ++c) {
    const double xi = state.xi[c];
    // The drift is inward and excursions are O(sqrt(dt)), so clamping keeps
    // the support invariant absolute without distorting the interior law.
    const double diff2 = std::max(0.0, 1.0 - xi * xi);
    const double eta = streams[c].gaussian();
    const double next = xi * (1.0 - dt / tau) + std::sqrt(diff2 * dt / tau) * eta;
    state.xi[c] = std::clamp(next, -1.0, 1.0);
  }
}

void colored_noise_step(ColoredNoiseState& state, double dt, std::span<RandomStream> streams) {
  if (state.kind == NoiseKind::ou) {
    ou_step(state, dt, streams);
  } else {
    sbm_step(state, dt, streams);
  }
}

double stationary_sample(NoiseKind kind, RandomStream& stream) {
  if (kind == NoiseKind::ou) return stream.gaussian();
  return 2.0 * stream.uniform() - 1.0;
}

double stationary_noise_variance(NoiseKind kind) {
  return kind == NoiseKind::ou ? 1.0 : 1.0 / 3.0;
}

double legendre_p(int n, double x) {
  if (n < 0) {
    throw Error(ErrorCode::invalid_argument, "legendre_p requires n >= 0");
  }
  if (n == 0) return 1.0;
  if (n == 1) return x;
  double p_prev = 1.0;
  double p = x;
  for (int k = 2; k <= n; ++k) {
    const double p_next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
    p_prev = p;
    p = p_next;
  }
  return p;
}

double sbm_transition_density(double xi, double xi0, double dt, double tau, int n_max) {
  if (xi < -1.0 || xi > 1.0 || xi0 < -1.0 || xi0 > 1.0) {
    throw Error(ErrorCode::invalid_argument, "sbm_transition_density requires xi, xi0 in [-1, 1]");
  }
  if (n_max < 0) {
    throw Error(ErrorCode::invalid_argument, "sbm_transition_density requires n_max >= 0");
  }
  if (!(tau > 0.0) || dt < 0.0) {
    throw Error(ErrorCode::invalid_argument, "sbm_transition_density requires tau > 0 and dt >= 0");
  }
  double sum = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    const double weight = (2.0 * n + 1.0) / 2.0;
    sum += weight * legendre_p(n, xi) * legendre_p(n, xi0) *
           std::exp(-n * (n + 1.0) * dt / (2.0 * tau));
  }
  return sum;
}

}  // namespace qsr
