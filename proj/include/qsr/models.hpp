#pragma once

#include <optional>
#include <vector>

#include "qsr/hilbert.hpp"
#include "qsr/noise.hpp"

namespace qsr {

enum class ModelVariant {
  two_state_stratonovich,  // single-channel order-parameter law, Stratonovich noise
  two_state_ito,           // its Ito form; presupposes the FDR
  n_state_stratonovich,    // projector law, K Stratonovich channels
  n_state_ito,             // its Ito form
  colored_n_state,         // projector law driven by OU/SBM noise; an ODE per realization
};

enum class StochasticConvention { ito, stratonovich };

const char* variant_name(ModelVariant variant);

// Which equation to integrate plus all physical parameters. Immutable in
// practice: pass by const reference and copy to modify.
struct ModelSpec {
  ModelVariant variant = ModelVariant::two_state_ito;
  ProjectorSet projectors;
  std::optional<HermitianOperator> hamiltonian;  // absent = zero

  double coupling = 1.0;          // deterministic collapse coupling (energy)
  double system_size = 1.0;       // extensive scale of the order parameter
  double hbar = 1.0;
  double diffusion = 0.0;         // white-noise diffusion constant (energy^2 * time); 0 = unset
  double noise_coupling = 0.0;    // colored-noise coupling (energy); 0 = unset
  double correlation_time = 0.0;  // colored variant only
  NoiseKind noise_kind = NoiseKind::ou;
  bool fdr_enforced = false;

  void validate() const;
  int dim() const { return projectors.dim(); }
  int channels() const;  // Wiener/noise channels: 1 for two-state variants, K otherwise
  bool is_colored() const { return variant == ModelVariant::colored_n_state; }
  StochasticConvention convention() const;
  double collapse_rate() const { return coupling * system_size / hbar; }
};

// Right-hand side of a white-noise model: deterministic drift plus one
// diffusion vector per independent Wiener channel.
struct TermPair {
  Vector drift;
  std::vector<Vector> diffusion;
  StochasticConvention convention = StochasticConvention::ito;
};

TermPair two_state_stratonovich_terms(const ModelSpec& spec, const Vector& psi);
TermPair two_state_ito_terms(const ModelSpec& spec, const Vector& psi);
TermPair n_state_stratonovich_terms(const ModelSpec& spec, const Vector& psi);
TermPair n_state_ito_terms(const ModelSpec& spec, const Vector& psi);

// Dispatch on spec.variant (white-noise variants only).
TermPair model_terms(const ModelSpec& spec, const Vector& psi);

// The correction operator applied to psi:
//   C psi = D_eff sum_k ( 1/2 [P_k - <P_k>]^2 - [<P_k^2> - <P_k>^2] ) psi,
// with D_eff the model's per-channel diffusion strength. Adding it to the
// Stratonovich drift yields the Ito drift of the matching variant.
Vector stratonovich_correction(const ModelSpec& spec, const Vector& psi);

// Full time-derivative of the colored-noise model. The noise enters as an
// ordinary smooth-in-time coefficient; there is no diffusion channel.
Vector colored_derivative(const ModelSpec& spec, const Vector& psi, const ColoredNoiseState& xi);

// dE/dt = (J N / hbar) (sum_k Tr[rho P_k H P_k] - Tr[rho H]). Exactly zero
// whenever H commutes with every projector.
double energy_rate(const ModelSpec& spec, const DensityMatrix& rho);

// Fills the missing noise parameter from the fluctuation-dissipation
// relation and sets fdr_enforced:
//   two-state variants:  hbar * coupling = 2 * diffusion * system_size
//   colored variant:     diffusion = 2 * E[xi^2]_stationary * noise_coupling^2 * correlation_time
// Over- or under-determined parameter sets are rejected.
ModelSpec derive_fdr_params(ModelSpec spec);

}  // namespace qsr
