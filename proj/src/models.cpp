#include "qsr/models.hpp"

#include <cmath>

namespace qsr {

namespace {

constexpr Complex kMinusI{0.0, -1.0};

void require_variant(const ModelSpec& spec, ModelVariant expected, const char* fn) {
  if (spec.variant != expected) {
    throw Error(ErrorCode::invalid_argument,
                std::string(fn) + " called with variant " + variant_name(spec.variant));
  }
}

void require_dim(const ModelSpec& spec, const Vector& psi, const char* fn) {
  if (psi.size() != spec.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                std::string(fn) + ": state dim " + std::to_string(psi.size()) +
                    " does not match model dim " + std::to_string(spec.dim()));
  }
}

Vector hamiltonian_term(const ModelSpec& spec, const Vector& psi) {
  if (!spec.hamiltonian) return Vector::Zero(psi.size());
  return (kMinusI / spec.hbar) * (spec.hamiltonian->mat() * psi);
}

// Expectations are projective (<psi|O|psi> / <psi|psi>), so predictor and
// midpoint states that drift off the unit sphere stay consistent.
double norm2_of(const Vector& psi) { return psi.squaredNorm(); }

// Per-channel squared diffusion strength of the variant's noise term.
double effective_diffusion(const ModelSpec& spec) {
  const double scale = spec.system_size / spec.hbar;
  switch (spec.variant) {
    case ModelVariant::two_state_stratonovich:
    case ModelVariant::two_state_ito:
      // Single channel sqrt(D) (S_z - <S_z>) = sqrt(D) N (sigma_z - <sigma_z>)
      // maps onto two projector channels of strength sqrt(2 D) N / hbar each.
      return 2.0 * spec.diffusion * scale * scale;
    case ModelVariant::n_state_stratonovich:
    case ModelVariant::n_state_ito:
      return spec.collapse_rate();
    case ModelVariant::colored_n_state:
      return spec.diffusion * scale * scale;
  }
  return 0.0;
}

}  // namespace

const char* variant_name(ModelVariant variant) {
  switch (variant) {
    case ModelVariant::two_state_stratonovich: return "two_state_stratonovich";
    case ModelVariant::two_state_ito: return "two_state_ito";
    case ModelVariant::n_state_stratonovich: return "n_state_stratonovich";
    case ModelVariant::n_state_ito: return "n_state_ito";
    case ModelVariant::colored_n_state: return "colored_n_state";
  }
  return "unknown";
}

void ModelSpec::validate() const {
  if (projectors.dim() < 2) {
    throw Error(ErrorCode::invalid_state, "model requires a projector set of dimension >= 2");
  }
  if (variant == ModelVariant::two_state_stratonovich || variant == ModelVariant::two_state_ito) {
    if (projectors.dim() != 2 || projectors.size() != 2) {
      throw Error(ErrorCode::invalid_state, "two-state variants require the canonical 2-projector set");
    }
  }
  if (coupling < 0.0 || !(system_size > 0.0) || !(hbar > 0.0)) {
    throw Error(ErrorCode::invalid_state,
                "system_size and hbar must be positive, coupling must be >= 0");
  }
  if (diffusion < 0.0 || noise_coupling < 0.0 || correlation_time < 0.0) {
    throw Error(ErrorCode::invalid_state, "diffusion, noise_coupling and correlation_time must be >= 0");
  }
  if (is_colored() && !(correlation_time > 0.0)) {
    throw Error(ErrorCode::invalid_state, "colored variant requires correlation_time > 0");
  }
  if (hamiltonian && hamiltonian->dim() != projectors.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "Hamiltonian dim does not match projector set");
  }
  if (fdr_enforced) {
    if (variant == ModelVariant::two_state_stratonovich || variant == ModelVariant::two_state_ito) {
      const double lhs = hbar * coupling;
      const double rhs = 2.0 * diffusion * system_size;
      if (std::abs(lhs - rhs) > tol::fdr_relative * std::max(std::abs(lhs), std::abs(rhs))) {
        throw Error(ErrorCode::fdr_conflict,
                    "FDR violated: hbar*coupling = " + std::to_string(lhs) +
                        " vs 2*diffusion*system_size = " + std::to_string(rhs));
      }
    } else if (is_colored()) {
      const double expect = 2.0 * stationary_noise_variance(noise_kind) * noise_coupling *
                            noise_coupling * correlation_time;
      if (std::abs(diffusion - expect) >
          tol::fdr_relative * std::max(std::abs(diffusion), std::abs(expect))) {
        throw Error(ErrorCode::fdr_conflict,
                    "colored-noise coupling inconsistent: diffusion = " + std::to_string(diffusion) +
                        " vs 2*E[xi^2]*G^2*tau = " + std::to_string(expect));
      }
    }
  }
}

int ModelSpec::channels() const {
  if (variant == ModelVariant::two_state_stratonovich || variant == ModelVariant::two_state_ito) {
    return 1;
  }
  return projectors.size();
}

StochasticConvention ModelSpec::convention() const {
  switch (variant) {
    case ModelVariant::two_state_stratonovich:
    case ModelVariant::n_state_stratonovich:
      return StochasticConvention::stratonovich;
    default:
      return StochasticConvention::ito;
  }
}

TermPair two_state_stratonovich_terms(const ModelSpec& spec, const Vector& psi) {
  require_variant(spec, ModelVariant::two_state_stratonovich, "two_state_stratonovich_terms");
  require_dim(spec, psi, "two_state_stratonovich_terms");

  const double n2 = norm2_of(psi);
  // S_z = N sigma_z; the coupling scales as J = coupling / N to keep the
  // dissipative term extensive.
  const double sz = spec.system_size * (std::norm(psi(0)) - std::norm(psi(1))) / n2;
  Vector centered(2);
  centered(0) = (spec.system_size - sz) * psi(0);
  centered(1) = (-spec.system_size - sz) * psi(1);

  TermPair out;
  out.convention = StochasticConvention::stratonovich;
  const double j_over_n = spec.coupling / spec.system_size;
  out.drift = hamiltonian_term(spec, psi) + (j_over_n / spec.hbar) * sz * centered;
  out.diffusion.push_back((std::sqrt(spec.diffusion) / spec.hbar) * centered);
  return out;
}

TermPair two_state_ito_terms(const ModelSpec& spec, const Vector& psi) {
  require_variant(spec, ModelVariant::two_state_ito, "two_state_ito_terms");
  require_dim(spec, psi, "two_state_ito_terms");
  if (!spec.fdr_enforced) {
    throw Error(ErrorCode::fdr_conflict,
                "two_state_ito_terms presupposes the fluctuation-dissipation relation; "
                "call derive_fdr_params first");
  }

  const double n2 = norm2_of(psi);
  const double s = (std::norm(psi(0)) - std::norm(psi(1))) / n2;  // <sigma_z>
  Vector centered(2);
  centered(0) = (1.0 - s) * psi(0);
  centered(1) = (-1.0 - s) * psi(1);
  Vector centered2(2);
  centered2(0) = (1.0 - s) * centered(0);
  centered2(1) = (-1.0 - s) * centered(1);

  const double rate = spec.collapse_rate();
  TermPair out;
  out.convention = StochasticConvention::ito;
  out.drift = hamiltonian_term(spec, psi) - (rate / 4.0) * centered2;
  out.diffusion.push_back(std::sqrt(rate / 2.0) * centered);
  return out;
}

TermPair n_state_stratonovich_terms(const ModelSpec& spec, const Vector& psi) {
  require_variant(spec, ModelVariant::n_state_stratonovich, "n_state_stratonovich_terms");
  require_dim(spec, psi, "n_state_stratonovich_terms");

  const double n2 = norm2_of(psi);
  const double rate = spec.collapse_rate();
  const double amp = std::sqrt(rate);

  TermPair out;
  out.convention = StochasticConvention::stratonovich;
  out.drift = hamiltonian_term(spec, psi);
  out.diffusion.reserve(spec.projectors.size());
  for (int k = 0; k < spec.projectors.size(); ++k) {
    const double p = spec.projectors.population(k, psi) / n2;
    Vector centered = spec.projectors.apply(k, psi) - p * psi;
    out.drift += (2.0 * rate * p) * centered;
    out.diffusion.push_back(amp * centered);
  }
  return out;
}

TermPair n_state_ito_terms(const ModelSpec& spec, const Vector& psi) {
  require_variant(spec, ModelVariant::n_state_ito, "n_state_ito_terms");
  require_dim(spec, psi, "n_state_ito_terms");

  const double n2 = norm2_of(psi);
  const double rate = spec.collapse_rate();
  const double amp = std::sqrt(rate);

  TermPair out;
  out.convention = StochasticConvention::ito;
  out.drift = hamiltonian_term(spec, psi);
  out.diffusion.reserve(spec.projectors.size());
  for (int k = 0; k < spec.projectors.size(); ++k) {
    const double p = spec.projectors.population(k, psi) / n2;
    Vector centered = spec.projectors.apply(k, psi) - p * psi;
    Vector centered_sq = spec.projectors.apply(k, centered) - p * centered;
    out.drift -= (rate / 2.0) * centered_sq;
    out.diffusion.push_back(amp * centered);
  }
  return out;
}

TermPair model_terms(const ModelSpec& spec, const Vector& psi) {
  switch (spec.variant) {
    case ModelVariant::two_state_stratonovich: return two_state_stratonovich_terms(spec, psi);
    case ModelVariant::two_state_ito: return two_state_ito_terms(spec, psi);
    case ModelVariant::n_state_stratonovich: return n_state_stratonovich_terms(spec, psi);
    case ModelVariant::n_state_ito: return n_state_ito_terms(spec, psi);
    case ModelVariant::colored_n_state:
      throw Error(ErrorCode::invalid_argument,
                  "colored variant has no Wiener terms; use colored_derivative");
  }
  throw Error(ErrorCode::invalid_argument, "unknown model variant");
}

Vector stratonovich_correction(const ModelSpec& spec, const Vector& psi) {
  require_dim(spec, psi, "stratonovich_correction");

  const double n2 = norm2_of(psi);
  const double strength = effective_diffusion(spec);
  Vector out = Vector::Zero(psi.size());
  for (int k = 0; k < spec.projectors.size(); ++k) {
    const double p = spec.projectors.population(k, psi) / n2;
    Vector centered = spec.projectors.apply(k, psi) - p * psi;
    Vector centered_sq = spec.projectors.apply(k, centered) - p * centered;
    const double variance = p - p * p;  // <P_k^2> - <P_k>^2 for a projector
    out += 0.5 * centered_sq - variance * psi;
  }
  return strength * out;
}

Vector colored_derivative(const ModelSpec& spec, const Vector& psi, const ColoredNoiseState& xi) {
  require_variant(spec, ModelVariant::colored_n_state, "colored_derivative");
  require_dim(spec, psi, "colored_derivative");
  if (static_cast<int>(xi.xi.size()) != spec.projectors.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "colored_derivative: " + std::to_string(xi.xi.size()) + " noise channels for " +
                    std::to_string(spec.projectors.size()) + " projectors");
  }

  const double n2 = norm2_of(psi);
  const double scale = spec.system_size / spec.hbar;
  Vector out = hamiltonian_term(spec, psi);
  for (int k = 0; k < spec.projectors.size(); ++k) {
    const double p = spec.projectors.population(k, psi) / n2;
    Vector centered = spec.projectors.apply(k, psi) - p * psi;
    out += scale * (2.0 * spec.coupling * p + spec.noise_coupling * xi.xi[k]) * centered;
  }
  return out;
}

double energy_rate(const ModelSpec& spec, const DensityMatrix& rho) {
  if (!spec.hamiltonian) {
    throw Error(ErrorCode::invalid_argument, "energy_rate requires a Hamiltonian");
  }
  const Matrix& h = spec.hamiltonian->mat();
  if (rho.dim() != spec.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "energy_rate: density matrix dim mismatch");
  }
  // Accumulate both traces in identical order so that the difference is
  // exactly zero whenever the pinched Hamiltonian equals H entrywise.
  const Matrix pinched = spec.projectors.pinch(h);
  const Matrix& r = rho.mat();
  Complex tr_pinched = 0.0;
  Complex tr_plain = 0.0;
  for (int i = 0; i < r.rows(); ++i) {
    for (int j = 0; j < r.cols(); ++j) {
      tr_pinched += r(i, j) * pinched(j, i);
      tr_plain += r(i, j) * h(j, i);
    }
  }
  return spec.collapse_rate() * (tr_pinched - tr_plain).real();
}

ModelSpec derive_fdr_params(ModelSpec spec) {
  switch (spec.variant) {
    case ModelVariant::two_state_stratonovich:
    case ModelVariant::two_state_ito: {
      const double target = spec.hbar * spec.coupling / (2.0 * spec.system_size);
      if (spec.diffusion == 0.0) {
        spec.diffusion = target;
      } else if (std::abs(spec.diffusion - target) >
                 tol::fdr_relative * std::max(spec.diffusion, target)) {
        throw Error(ErrorCode::fdr_conflict,
                    "over-determined: diffusion = " + std::to_string(spec.diffusion) +
                        " conflicts with hbar*coupling/(2*system_size) = " + std::to_string(target));
      }
      break;
    }
    case ModelVariant::n_state_stratonovich:
    case ModelVariant::n_state_ito:
      // The projector laws carry the relation structurally; there is no free
      // noise amplitude to fill.
      if (spec.diffusion != 0.0 || spec.noise_coupling != 0.0) {
        throw Error(ErrorCode::fdr_conflict,
                    "n-state variants take their noise amplitude from coupling*system_size/hbar; "
                    "leave diffusion and noise_coupling unset");
      }
      break;
    case ModelVariant::colored_n_state: {
      if (!(spec.correlation_time > 0.0)) {
        throw Error(ErrorCode::invalid_state, "colored variant requires correlation_time > 0");
      }
      const double e2 = stationary_noise_variance(spec.noise_kind);
      const bool has_d = spec.diffusion != 0.0;
      const bool has_g = spec.noise_coupling != 0.0;
      if (has_g && !has_d) {
        spec.diffusion = 2.0 * e2 * spec.noise_coupling * spec.noise_coupling * spec.correlation_time;
      } else if (has_d && !has_g) {
        spec.noise_coupling = std::sqrt(spec.diffusion / (2.0 * e2 * spec.correlation_time));
      } else if (has_d && has_g) {
        const double expect = 2.0 * e2 * spec.noise_coupling * spec.noise_coupling * spec.correlation_time;
        if (std::abs(spec.diffusion - expect) >
            tol::fdr_relative * std::max(spec.diffusion, expect)) {
          throw Error(ErrorCode::fdr_conflict,
                      "over-determined: both diffusion and noise_coupling given and inconsistent "
                      "(diffusion = " + std::to_string(spec.diffusion) +
                          ", 2*E[xi^2]*G^2*tau = " + std::to_string(expect) + ")");
        }
      } else {
        throw Error(ErrorCode::fdr_conflict,
                    "under-determined: set one of diffusion or noise_coupling");
      }
      break;
    }
  }
  spec.fdr_enforced = true;
  spec.validate();
  return spec;
}

}  // namespace qsr
