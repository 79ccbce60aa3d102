#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qsr/models.hpp"

using namespace qsr;

namespace {

ModelSpec make_spec(ModelVariant variant, int dim, double coupling = 1.0, double system_size = 1.0,
                    double hbar = 1.0) {
  ModelSpec spec;
  spec.variant = variant;
  spec.projectors = ProjectorSet::canonical(dim);
  spec.coupling = coupling;
  spec.system_size = system_size;
  spec.hbar = hbar;
  return spec;
}

Vector random_state(std::mt19937_64& gen, int dim) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(normal(gen), normal(gen));
  return v / v.norm();
}

Vector basis_state(int dim, int j) {
  Vector v = Vector::Zero(dim);
  v(j) = 1.0;
  return v;
}

double max_abs(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("two-state stratonovich terms: fixed point and symmetric point") {
  ModelSpec spec = make_spec(ModelVariant::two_state_stratonovich, 2);
  spec.diffusion = 0.5;

  const TermPair collapsed = two_state_stratonovich_terms(spec, basis_state(2, 0));
  CHECK(max_abs(collapsed.drift) == 0.0);
  CHECK(max_abs(collapsed.diffusion[0]) == 0.0);
  CHECK(collapsed.convention == StochasticConvention::stratonovich);

  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const TermPair symmetric = two_state_stratonovich_terms(spec, plus);
  CHECK(max_abs(symmetric.drift) == 0.0);  // <S_z> = 0 kills the deterministic term
  // Diffusion = (sqrt(D) N / hbar)(1/sqrt2, -1/sqrt2).
  const double amp = std::sqrt(spec.diffusion) * spec.system_size / spec.hbar;
  CHECK(symmetric.diffusion[0](0).real() == doctest::Approx(amp / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(symmetric.diffusion[0](1).real() == doctest::Approx(-amp / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("two-state stratonovich drift fixture at (sqrt(0.3), sqrt(0.7))") {
  // Hand calculation, J = coupling/system_size = 1, hbar = 1, H = 0:
  //   <sigma_z> = 0.3 - 0.7 = -0.4
  //   drift_0 = <sz>(1 - <sz>) psi_0 = (-0.4)(1.4) sqrt(0.3) = -0.56 sqrt(0.3)
  //   drift_1 = <sz>(-1 - <sz>) psi_1 = (-0.4)(-0.6) sqrt(0.7) = 0.24 sqrt(0.7)
  ModelSpec spec = make_spec(ModelVariant::two_state_stratonovich, 2);
  spec.diffusion = 0.5;
  Vector psi(2);
  psi << std::sqrt(0.3), std::sqrt(0.7);
  const TermPair terms = two_state_stratonovich_terms(spec, psi);
  CHECK(terms.drift(0).real() == doctest::Approx(-0.56 * std::sqrt(0.3)).epsilon(1e-14));
  CHECK(terms.drift(1).real() == doctest::Approx(0.24 * std::sqrt(0.7)).epsilon(1e-14));
  CHECK(terms.drift(0).imag() == doctest::Approx(0.0));
  CHECK(terms.drift(1).imag() == doctest::Approx(0.0));
}

TEST_CASE("two-state ito terms: fixed point, symmetric point, FDR gate") {
  ModelSpec spec = derive_fdr_params(make_spec(ModelVariant::two_state_ito, 2));
  CHECK(spec.diffusion == doctest::Approx(0.5));

  const TermPair collapsed = two_state_ito_terms(spec, basis_state(2, 1));
  CHECK(max_abs(collapsed.drift) == 0.0);
  CHECK(max_abs(collapsed.diffusion[0]) == 0.0);

  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const TermPair symmetric = two_state_ito_terms(spec, plus);
  // (sigma_z - 0)^2 = identity: drift = -(1/4) psi.
  CHECK(symmetric.drift(0).real() == doctest::Approx(-0.25 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(symmetric.drift(1).real() == doctest::Approx(-0.25 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(symmetric.diffusion[0](0).real() ==
        doctest::Approx(std::sqrt(0.5) / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(symmetric.diffusion[0](1).real() ==
        doctest::Approx(-std::sqrt(0.5) / std::sqrt(2.0)).epsilon(1e-14));

  ModelSpec no_fdr = make_spec(ModelVariant::two_state_ito, 2);
  no_fdr.diffusion = 0.5;
  CHECK_THROWS_AS(two_state_ito_terms(no_fdr, plus), Error);
}

TEST_CASE("n-state terms at collapsed and uniform states") {
  ModelSpec strat = make_spec(ModelVariant::n_state_stratonovich, 4);
  ModelSpec ito = make_spec(ModelVariant::n_state_ito, 4);

  for (int j = 0; j < 4; ++j) {
    const TermPair ts = n_state_stratonovich_terms(strat, basis_state(4, j));
    const TermPair ti = n_state_ito_terms(ito, basis_state(4, j));
    CHECK(max_abs(ts.drift) == 0.0);
    CHECK(max_abs(ti.drift) == 0.0);
    for (const auto& d : ts.diffusion) CHECK(max_abs(d) == 0.0);
    for (const auto& d : ti.diffusion) CHECK(max_abs(d) == 0.0);
  }

  Vector uniform = Vector::Constant(4, Complex(0.5, 0.0));
  const TermPair ts = n_state_stratonovich_terms(strat, uniform);
  CHECK(max_abs(ts.drift) < 1e-15);  // sum_k (1/N)(P_k - 1/N) psi = 0
  CHECK(ts.diffusion.size() == 4);
  for (int k = 0; k < 4; ++k) {
    // sqrt(rate)(P_k - 1/4) psi has +3/8 on slot k and -1/8 elsewhere.
    CHECK(ts.diffusion[k](k).real() == doctest::Approx(0.5 * 0.75).epsilon(1e-14));
    CHECK(ts.diffusion[k]((k + 1) % 4).real() == doctest::Approx(-0.5 * 0.25).epsilon(1e-14));
  }

  ModelSpec ito2 = make_spec(ModelVariant::n_state_ito, 2);
  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const TermPair ti2 = n_state_ito_terms(ito2, plus);
  // Two channels, each (P_k - 1/2)^2 psi = psi/4: drift = -(1/2)(psi/4)*2 = -psi/4.
  CHECK(ti2.drift(0).real() == doctest::Approx(-0.25 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(ti2.drift(1).real() == doctest::Approx(-0.25 / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("stratonovich correction closed form at the symmetric two-state point") {
  ModelSpec spec = make_spec(ModelVariant::n_state_stratonovich, 2);  // rate = 1
  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const Vector corrected = stratonovich_correction(spec, plus);
  CHECK(corrected(0).real() == doctest::Approx(-0.25 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(corrected(1).real() == doctest::Approx(-0.25 / std::sqrt(2.0)).epsilon(1e-14));

  const Vector at_fixed_point = stratonovich_correction(spec, basis_state(2, 0));
  CHECK(max_abs(at_fixed_point) == 0.0);
}

TEST_CASE("stratonovich terms plus correction equal the ito terms") {
  std::mt19937_64 gen(101);

  SUBCASE("n-state, N = 5") {
    ModelSpec strat = make_spec(ModelVariant::n_state_stratonovich, 5, 1.3, 2.0, 0.7);
    ModelSpec ito = strat;
    ito.variant = ModelVariant::n_state_ito;
    for (int trial = 0; trial < 100; ++trial) {
      const Vector psi = random_state(gen, 5);
      const TermPair ts = n_state_stratonovich_terms(strat, psi);
      const TermPair ti = n_state_ito_terms(ito, psi);
      const Vector converted = ts.drift + stratonovich_correction(strat, psi);
      CHECK(max_abs(converted - ti.drift) < 1e-12);
      for (std::size_t k = 0; k < ts.diffusion.size(); ++k) {
        CHECK(max_abs(ts.diffusion[k] - ti.diffusion[k]) < 1e-12);
      }
    }
  }

  SUBCASE("two-state at matched parameters under the FDR") {
    ModelSpec strat = derive_fdr_params(make_spec(ModelVariant::two_state_stratonovich, 2, 1.7, 3.0, 1.1));
    ModelSpec ito = strat;
    ito.variant = ModelVariant::two_state_ito;
    for (int trial = 0; trial < 100; ++trial) {
      const Vector psi = random_state(gen, 2);
      const TermPair ts = two_state_stratonovich_terms(strat, psi);
      const TermPair ti = two_state_ito_terms(ito, psi);
      const Vector converted = ts.drift + stratonovich_correction(strat, psi);
      CHECK(max_abs(converted - ti.drift) < 1e-12);
      CHECK(max_abs(ts.diffusion[0] - ti.diffusion[0]) < 1e-12);
    }
  }
}

TEST_CASE("norm balance: 2<C> cancels the ito variance term") {
  std::mt19937_64 gen(103);
  ModelSpec spec = make_spec(ModelVariant::n_state_stratonovich, 6, 0.9, 1.5, 1.2);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector psi = random_state(gen, 6);
    const Vector c_psi = stratonovich_correction(spec, psi);
    const double two_c = 2.0 * psi.dot(c_psi).real();
    // <dG^2> per unit dt: sum_k |diffusion_k|^2 on the normalized state.
    ModelSpec ito = spec;
    ito.variant = ModelVariant::n_state_ito;
    const TermPair ti = n_state_ito_terms(ito, psi);
    double variance = 0.0;
    for (const auto& d : ti.diffusion) variance += d.squaredNorm();
    CHECK(std::abs(two_c + variance) < 1e-12);
  }
}

TEST_CASE("norm tangency of the ito drift") {
  std::mt19937_64 gen(107);
  for (int dim : {2, 5}) {
    ModelSpec spec = make_spec(dim == 2 ? ModelVariant::two_state_ito : ModelVariant::n_state_ito,
                               dim, 1.4, 2.5, 0.8);
    if (dim == 2) spec = derive_fdr_params(spec);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector psi = random_state(gen, dim);
      const TermPair t = model_terms(spec, psi);
      double total = 2.0 * psi.dot(t.drift).real();
      for (const auto& d : t.diffusion) total += d.squaredNorm();
      CHECK(std::abs(total) < 1e-12);
    }
  }
}

TEST_CASE("phase covariance of every term") {
  std::mt19937_64 gen(109);
  std::uniform_real_distribution<double> angle(0.0, 6.28);
  ModelSpec spec = make_spec(ModelVariant::n_state_ito, 4);
  ModelSpec colored = make_spec(ModelVariant::colored_n_state, 4);
  colored.correlation_time = 0.1;
  colored.noise_coupling = 1.0;
  ColoredNoiseState xi;
  xi.kind = NoiseKind::ou;
  xi.correlation_time = 0.1;
  xi.xi = {0.3, -0.2, 0.8, -1.1};

  for (int trial = 0; trial < 100; ++trial) {
    const Vector psi = random_state(gen, 4);
    const Complex phase = std::polar(1.0, angle(gen));
    const TermPair base = n_state_ito_terms(spec, psi);
    const TermPair rotated = n_state_ito_terms(spec, Vector(phase * psi));
    CHECK(max_abs(rotated.drift - phase * base.drift) < 1e-12);
    for (std::size_t k = 0; k < base.diffusion.size(); ++k) {
      CHECK(max_abs(rotated.diffusion[k] - phase * base.diffusion[k]) < 1e-12);
    }
    const Vector cd = colored_derivative(colored, psi, xi);
    const Vector cd_rot = colored_derivative(colored, Vector(phase * psi), xi);
    CHECK(max_abs(cd_rot - phase * cd) < 1e-12);
  }
}

TEST_CASE("fixed points: every collapsed basis state annihilates every term") {
  for (int dim = 2; dim <= 16; ++dim) {
    ModelSpec strat = make_spec(ModelVariant::n_state_stratonovich, dim);
    ModelSpec ito = make_spec(ModelVariant::n_state_ito, dim);
    ModelSpec colored = make_spec(ModelVariant::colored_n_state, dim);
    colored.correlation_time = 0.2;
    colored.noise_coupling = 2.0;
    ColoredNoiseState xi;
    xi.kind = NoiseKind::ou;
    xi.correlation_time = 0.2;
    xi.xi.assign(dim, 0.0);
    for (int c = 0; c < dim; ++c) xi.xi[c] = (c % 2 ? -1.5 : 0.7);

    for (int j = 0; j < dim; ++j) {
      const Vector basis = basis_state(dim, j);
      const TermPair ts = n_state_stratonovich_terms(strat, basis);
      const TermPair ti = n_state_ito_terms(ito, basis);
      CHECK(max_abs(ts.drift) == 0.0);
      CHECK(max_abs(ti.drift) == 0.0);
      for (const auto& d : ts.diffusion) CHECK(max_abs(d) == 0.0);
      for (const auto& d : ti.diffusion) CHECK(max_abs(d) == 0.0);
      CHECK(max_abs(colored_derivative(colored, basis, xi)) == 0.0);
      CHECK(max_abs(stratonovich_correction(strat, basis)) == 0.0);
    }
  }
}

TEST_CASE("colored derivative: fixture, zero-noise reduction, channel mismatch") {
  ModelSpec spec = make_spec(ModelVariant::colored_n_state, 2);
  spec.correlation_time = 0.1;
  spec.noise_coupling = 1.0;
  spec.coupling = 1.0;

  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);

  // Fixture: with J = 0 only the G xi term acts; xi = (1, -1) gives
  // sum_k (P_k - 1/2) xi^k psi = (psi_0, -psi_1).
  ModelSpec no_j = spec;
  no_j.coupling = 0.0;
  ColoredNoiseState xi;
  xi.kind = NoiseKind::ou;
  xi.correlation_time = 0.1;
  xi.xi = {1.0, -1.0};
  const Vector d = colored_derivative(no_j, plus, xi);
  CHECK(d(0).real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-13));
  CHECK(d(1).real() == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-13));

  // Zero noise reduces to the deterministic projector drift.
  ColoredNoiseState quiet = xi;
  quiet.xi = {0.0, 0.0};
  const Vector det = colored_derivative(spec, plus, quiet);
  ModelSpec strat = make_spec(ModelVariant::n_state_stratonovich, 2);
  const TermPair reference = n_state_stratonovich_terms(strat, plus);
  CHECK(max_abs(det - reference.drift) < 1e-14);

  ColoredNoiseState wrong = xi;
  wrong.xi = {1.0, -1.0, 0.0};
  CHECK_THROWS_AS(colored_derivative(spec, plus, wrong), Error);
}

TEST_CASE("energy rate: commuting Hamiltonians give exactly zero") {
  ModelSpec spec = make_spec(ModelVariant::n_state_ito, 2);
  Matrix h_diag(2, 2);
  h_diag << 1.7, 0.0, 0.0, -2.3;
  spec.hamiltonian = HermitianOperator(h_diag);

  Vector psi(2);
  psi << std::sqrt(0.3), std::sqrt(0.7);
  CHECK(energy_rate(spec, pure_projector(StateVector(psi))) == 0.0);

  // Block projectors with a block-diagonal Hamiltonian.
  ModelSpec blocks = make_spec(ModelVariant::n_state_ito, 4);
  blocks.projectors = ProjectorSet::from_index_groups(4, {{0, 1}, {2, 3}});
  Matrix h_block = Matrix::Zero(4, 4);
  h_block(0, 1) = 0.4;
  h_block(1, 0) = 0.4;
  h_block(2, 2) = 1.0;
  h_block(3, 3) = -1.0;
  blocks.hamiltonian = HermitianOperator(h_block);
  std::mt19937_64 gen(113);
  const DensityMatrix rho = pure_projector(StateVector(random_state(gen, 4)));
  CHECK(energy_rate(blocks, rho) == 0.0);
}

TEST_CASE("energy rate fixtures with sigma_x") {
  ModelSpec spec = make_spec(ModelVariant::n_state_ito, 2);
  Matrix sx(2, 2);
  sx << 0.0, 1.0, 1.0, 0.0;
  spec.hamiltonian = HermitianOperator(sx);

  // Maximally mixed state: both traces vanish.
  Matrix half = 0.5 * Matrix::Identity(2, 2);
  CHECK(energy_rate(spec, DensityMatrix(half)) == doctest::Approx(0.0));

  // |+><+|: pinched sigma_x = 0 while Tr[rho sigma_x] = 1, so dE/dt = -1.
  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  CHECK(energy_rate(spec, pure_projector(StateVector(plus))) == doctest::Approx(-1.0).epsilon(1e-14));

  ModelSpec no_h = make_spec(ModelVariant::n_state_ito, 2);
  CHECK_THROWS_AS(energy_rate(no_h, pure_projector(StateVector(plus))), Error);
}

TEST_CASE("derive_fdr_params fills and validates the relations") {
  SUBCASE("two-state: D = hbar J / (2 N)") {
    ModelSpec spec = make_spec(ModelVariant::two_state_ito, 2, 2.0, 4.0, 1.0);
    const ModelSpec derived = derive_fdr_params(spec);
    CHECK(derived.diffusion == doctest::Approx(0.25));
    CHECK(derived.fdr_enforced);

    spec.diffusion = 0.11;  // conflicts
    CHECK_THROWS_AS(derive_fdr_params(spec), Error);
  }

  SUBCASE("colored OU: D = 2 G^2 tau") {
    ModelSpec spec = make_spec(ModelVariant::colored_n_state, 3);
    spec.noise_kind = NoiseKind::ou;
    spec.noise_coupling = 3.0;
    spec.correlation_time = 0.01;
    const ModelSpec derived = derive_fdr_params(spec);
    CHECK(derived.diffusion == doctest::Approx(0.18).epsilon(1e-14));
  }

  SUBCASE("colored SBM: D = (2/3) G^2 tau") {
    ModelSpec spec = make_spec(ModelVariant::colored_n_state, 3);
    spec.noise_kind = NoiseKind::sbm;
    spec.noise_coupling = 3.0;
    spec.correlation_time = 0.01;
    const ModelSpec derived = derive_fdr_params(spec);
    CHECK(derived.diffusion == doctest::Approx(0.06).epsilon(1e-14));
  }

  SUBCASE("colored: G from D, and under/over-determination errors") {
    ModelSpec spec = make_spec(ModelVariant::colored_n_state, 2);
    spec.noise_kind = NoiseKind::ou;
    spec.correlation_time = 0.05;
    spec.diffusion = 1.0;
    const ModelSpec derived = derive_fdr_params(spec);
    CHECK(derived.noise_coupling == doctest::Approx(std::sqrt(10.0)).epsilon(1e-14));

    ModelSpec neither = make_spec(ModelVariant::colored_n_state, 2);
    neither.correlation_time = 0.05;
    CHECK_THROWS_AS(derive_fdr_params(neither), Error);

    ModelSpec both = derived;
    both.diffusion = 2.0;  // inconsistent with the derived G
    CHECK_THROWS_AS(derive_fdr_params(both), Error);
  }
}

TEST_CASE("model spec validation catches inconsistent parameter sets") {
  ModelSpec spec = make_spec(ModelVariant::two_state_ito, 2);
  spec.fdr_enforced = true;
  spec.diffusion = 0.4;  // violates hbar*J = 2 D N
  CHECK_THROWS_AS(spec.validate(), Error);

  ModelSpec wrong_dim = make_spec(ModelVariant::two_state_ito, 3);
  CHECK_THROWS_AS(wrong_dim.validate(), Error);

  ModelSpec colored = make_spec(ModelVariant::colored_n_state, 2);
  CHECK_THROWS_AS(colored.validate(), Error);  // correlation_time unset

  CHECK_THROWS_AS(model_terms(colored, basis_state(2, 0)), Error);
}
