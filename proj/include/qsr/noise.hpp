#pragma once

#include <span>
#include <vector>

#include "qsr/errors.hpp"
#include "qsr/rng.hpp"

namespace qsr {

enum class NoiseKind { ou, sbm };

const char* noise_kind_name(NoiseKind kind);

// Gaussian increment with mean 0 and variance dt.
double wiener_increment(double dt, RandomStream& stream);

// One scalar correlated-noise process per collapse channel. For SBM the
// values stay inside [-1, 1]; steps never return values outside it.
struct ColoredNoiseState {
  NoiseKind kind = NoiseKind::ou;
  double correlation_time = 0.0;
  std::vector<double> xi;

  // Channels initialized from the stationary law, one stream per channel.
  static ColoredNoiseState stationary(NoiseKind kind, double correlation_time, int channels,
                                      std::span<RandomStream> streams);

  void validate() const;
};

// Exact one-step OU transition: xi' = xi e^{-dt/tau} + sqrt(1 - e^{-2 dt/tau}) eta.
// The exact kernel carries no dt bias, so any dt > 0 is valid.
void ou_step(ColoredNoiseState& state, double dt, std::span<RandomStream> streams);

// Euler-Maruyama for d xi = -xi dt/tau + sqrt((1 - xi^2)/tau) dW, result
// clamped to [-1, 1]. Requires dt <= tau/10; larger steps are rejected.
void sbm_step(ColoredNoiseState& state, double dt, std::span<RandomStream> streams);

// Dispatches to ou_step / sbm_step on state.kind.
void colored_noise_step(ColoredNoiseState& state, double dt, std::span<RandomStream> streams);

// Draw from the stationary law: standard normal (OU) or uniform on [-1, 1] (SBM).
double stationary_sample(NoiseKind kind, RandomStream& stream);

// Stationary second moment: 1 for OU, 1/3 for SBM.
double stationary_noise_variance(NoiseKind kind);

// Legendre polynomial P_n(x) by the Bonnet recurrence.
double legendre_p(int n, double x);

// Truncated spectral expansion of the SBM transition density on [-1, 1]:
//   sum_{n=0}^{n_max} (2n+1)/2 P_n(xi) P_n(xi0) exp[-n(n+1) dt / (2 tau)].
double sbm_transition_density(double xi, double xi0, double dt, double tau, int n_max);

}  // namespace qsr
