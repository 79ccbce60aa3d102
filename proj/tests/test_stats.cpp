#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qsr/stats.hpp"

using namespace qsr;

namespace {

ModelSpec two_state_ito_spec() {
  ModelSpec spec;
  spec.variant = ModelVariant::two_state_ito;
  spec.projectors = ProjectorSet::canonical(2);
  return derive_fdr_params(spec);
}

StateVector two_state(double p0) {
  Vector v(2);
  v << std::sqrt(p0), std::sqrt(1.0 - p0);
  return StateVector(v);
}

}  // namespace

TEST_CASE("ks statistic: identical, shifted, calibrated") {
  std::vector<double> a{0.1, 0.4, 0.7, 0.9};
  const KSResult same = ks_statistic(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.pass);

  RandomStream u1 = RandomStream::derive(1, 10);
  RandomStream u2 = RandomStream::derive(1, 11);
  std::vector<double> x(1000);
  std::vector<double> y(1000);
  for (auto& v : x) v = u1.uniform();
  for (auto& v : y) v = 0.5 + u2.uniform();
  const KSResult shifted = ks_statistic(x, y);
  CHECK(std::abs(shifted.statistic - 0.5) < 0.05);  // analytic CDF gap
  CHECK_FALSE(shifted.pass);

  // Significance calibration: same distribution passes at 5% almost always.
  int passes = 0;
  for (int rep = 0; rep < 100; ++rep) {
    RandomStream sa = RandomStream::derive(2, 2 * rep);
    RandomStream sb = RandomStream::derive(2, 2 * rep + 1);
    std::vector<double> p(2000);
    std::vector<double> q(2000);
    for (auto& v : p) v = sa.uniform();
    for (auto& v : q) v = sb.uniform();
    passes += ks_statistic(p, q).pass;
  }
  INFO("passes ", passes, "/100");
  CHECK(passes >= 90);

  std::vector<double> empty;
  CHECK_THROWS_AS(ks_statistic(empty, a), Error);
}

TEST_CASE("chi-square critical values match tabulated points") {
  CHECK(chi_square_critical(19, 0.05) == doctest::Approx(30.1435).epsilon(1e-3));
  CHECK(chi_square_critical(1, 0.05) == doctest::Approx(3.8415).epsilon(1e-3));
  CHECK(chi_square_critical(10, 0.01) == doctest::Approx(23.2093).epsilon(1e-3));

  // Q(1/2, x) = erfc(sqrt(x)).
  for (double x : {0.1, 0.5, 1.0, 3.0, 10.0}) {
    CHECK(regularized_gamma_q(0.5, x) == doctest::Approx(std::erfc(std::sqrt(x))).epsilon(1e-10));
  }
}

TEST_CASE("autocorrelation estimate: constant path and noise oracles") {
  std::vector<double> constant(10000, 3.7);
  const auto flat = autocorrelation_estimate(constant, 0.1, 5.0);
  for (const auto& [lag, value] : flat) CHECK(std::abs(value) < 1e-20);

  // OU and SBM paths against their analytic laws, batched for error bars.
  for (NoiseKind kind : {NoiseKind::ou, NoiseKind::sbm}) {
    const double tau = 1.0;
    const double dt = kind == NoiseKind::ou ? 0.1 : 0.01;
    const std::size_t lag_steps = static_cast<std::size_t>(std::llround(tau / dt));
    const int batches = 20;
    const std::size_t batch_len = kind == NoiseKind::ou ? 50'000 : 100'000;

    std::vector<RandomStream> streams{RandomStream::derive(55, kind == NoiseKind::ou ? 0 : 1)};
    ColoredNoiseState state;
    state.kind = kind;
    state.correlation_time = tau;
    state.xi = {stationary_sample(kind, streams[0])};
    for (int burn = 0; burn < 3000; ++burn) colored_noise_step(state, dt, streams);

    std::vector<double> estimates;
    std::vector<double> path(batch_len);
    for (int b = 0; b < batches; ++b) {
      for (auto& v : path) {
        colored_noise_step(state, dt, streams);
        v = state.xi[0];
      }
      const auto acf = autocorrelation_estimate(path, dt, tau);
      estimates.push_back(acf[lag_steps].second);
    }
    double mean = 0.0;
    for (double v : estimates) mean += v;
    mean /= batches;
    double var = 0.0;
    for (double v : estimates) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / (batches - 1.0) / batches);

    const double expected =
        (kind == NoiseKind::ou ? 1.0 : 1.0 / 3.0) * std::exp(-1.0);
    INFO(noise_kind_name(kind), ": ", mean, " expected ", expected, " se ", se);
    CHECK(std::abs(mean - expected) < 3.0 * se);
  }

  std::vector<double> short_path(100, 0.0);
  CHECK_THROWS_AS(autocorrelation_estimate(short_path, 0.1, 5.0), Error);
}

TEST_CASE("run_ensemble: m = 1 reduces to run_trajectory") {
  const ModelSpec spec = two_state_ito_spec();
  IntegratorConfig config;
  config.dt = 1e-2;
  config.t_max = 20.0;
  const StateVector psi0 = two_state(0.8);

  const EnsembleSummary summary = run_ensemble(spec, psi0, config, 1, 321, {}, 1);
  const TrajectoryRecord record = run_trajectory(spec, psi0, config, 0, 321);
  REQUIRE(record.outcome.has_value());
  CHECK(summary.outcome_counts[*record.outcome] == 1);
  CHECK(summary.unresolved_count == 0);
}

TEST_CASE("run_ensemble: fingerprints track inputs, summaries ignore scheduling") {
  const ModelSpec spec = two_state_ito_spec();
  IntegratorConfig config;
  config.dt = 1e-2;
  config.t_max = 20.0;
  const StateVector psi0 = two_state(0.8);
  const std::vector<double> checkpoints{0.25, 0.5, 1.0};

  const EnsembleSummary serial = run_ensemble(spec, psi0, config, 300, 9, checkpoints, 1);
  const EnsembleSummary parallel = run_ensemble(spec, psi0, config, 300, 9, checkpoints, 4);
  const EnsembleSummary reseeded = run_ensemble(spec, psi0, config, 300, 10, checkpoints, 4);

  CHECK(serial.fingerprint == parallel.fingerprint);
  CHECK(serial.fingerprint != reseeded.fingerprint);
  CHECK(serial.outcome_counts == parallel.outcome_counts);
  CHECK(serial.unresolved_count == parallel.unresolved_count);
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    for (int k = 0; k < 2; ++k) {
      CHECK(serial.checkpoint_means[c][k] == parallel.checkpoint_means[c][k]);
      CHECK(serial.checkpoint_stddevs[c][k] == parallel.checkpoint_stddevs[c][k]);
    }
  }
}

TEST_CASE("born_check: exact case, uniform case, unresolved gate") {
  const ModelSpec spec = two_state_ito_spec();
  IntegratorConfig config;
  config.dt = 1e-2;
  config.t_max = 25.0;

  SUBCASE("basis state collapses to itself every time") {
    Vector v(2);
    v << 1.0, 0.0;
    const StateVector psi0(v);
    const EnsembleSummary summary = run_ensemble(spec, psi0, config, 50, 77, {}, 2);
    CHECK(summary.outcome_counts[0] == 50);
    const BornCheck check = born_check(summary, psi0);
    CHECK(check.pass);
    CHECK(check.observed[0] == 1.0);
    CHECK(check.margin[0] == 0.0);
  }

  SUBCASE("uniform four-state superposition") {
    ModelSpec spec4;
    spec4.variant = ModelVariant::n_state_ito;
    spec4.projectors = ProjectorSet::canonical(4);
    Vector v = Vector::Constant(4, Complex(0.5, 0.0));
    const StateVector psi0(v);
    const EnsembleSummary summary = run_ensemble(spec4, psi0, config, 4000, 2024, {}, 0);
    const BornCheck check = born_check(summary, psi0);
    for (int k = 0; k < 4; ++k) {
      INFO("state ", k, ": ", check.observed[k], " +- ", check.margin[k]);
      CHECK(check.margin[k] == doctest::Approx(3.0 * std::sqrt(0.25 * 0.75 / 4000)));
      CHECK(std::abs(check.observed[k] - 0.25) <= check.margin[k]);
    }
    CHECK(check.pass);
  }

  SUBCASE("too many unresolved trajectories is an error") {
    IntegratorConfig tiny = config;
    tiny.t_max = 0.01;
    const StateVector psi0 = two_state(0.8);
    const EnsembleSummary summary = run_ensemble(spec, psi0, tiny, 100, 5, {}, 2);
    CHECK_THROWS_AS(born_check(summary, psi0), Error);
  }
}

TEST_CASE("martingale_check: time-zero exactness and FDR sensitivity") {
  IntegratorConfig config;
  config.dt = 1e-2;
  config.t_max = 25.0;
  const StateVector psi0 = two_state(0.8);
  const std::vector<double> checkpoints{0.0, 0.25, 0.5, 1.0};

  SUBCASE("with the FDR on, diagonals hold their initial values") {
    const EnsembleSummary summary =
        run_ensemble(two_state_ito_spec(), psi0, config, 2000, 11, checkpoints, 0);
    const MartingaleCheck check = martingale_check(summary, psi0);
    CHECK(check.pass);
    CHECK(summary.checkpoint_means[0][0] == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(summary.checkpoint_stddevs[0][0] == 0.0);  // t = 0 is exact
  }

  SUBCASE("with zero coupling nothing moves") {
    ModelSpec frozen;
    frozen.variant = ModelVariant::two_state_ito;
    frozen.projectors = ProjectorSet::canonical(2);
    frozen.coupling = 0.0;
    frozen = derive_fdr_params(frozen);
    const EnsembleSummary summary = run_ensemble(frozen, psi0, config, 200, 13, checkpoints, 2);
    for (const auto& means : summary.checkpoint_means) {
      CHECK(means[0] == doctest::Approx(0.8).epsilon(1e-12));
    }
  }

  SUBCASE("breaking the FDR breaks the martingale") {
    ModelSpec broken;
    broken.variant = ModelVariant::two_state_stratonovich;
    broken.projectors = ProjectorSet::canonical(2);
    broken = derive_fdr_params(broken);
    const double fdr_diffusion = broken.diffusion;

    const EnsembleSummary good =
        run_ensemble(broken, psi0, config, 2000, 17, checkpoints, 0);
    CHECK(martingale_check(good, psi0).pass);

    broken.diffusion = 2.0 * fdr_diffusion;
    broken.fdr_enforced = false;
    const EnsembleSummary bad = run_ensemble(broken, psi0, config, 2000, 17, checkpoints, 0);
    const MartingaleCheck failed = martingale_check(bad, psi0);
    INFO("t=1 mean with doubled diffusion: ", failed.mean.back()[0]);
    CHECK_FALSE(failed.pass);
  }
}

TEST_CASE("homogenization sweep: structure and coupling rescaling") {
  ModelSpec colored;
  colored.variant = ModelVariant::colored_n_state;
  colored.projectors = ProjectorSet::canonical(2);
  colored.noise_kind = NoiseKind::ou;
  colored.correlation_time = 0.1;

  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_max = 0.5;
  const StateVector psi0 = two_state(0.8);

  const std::vector<double> taus{0.1, 0.01};
  const HomogenizationResult result =
      homogenization_sweep(colored, psi0, taus, config, 400, 3000, 0);
  REQUIRE(result.ks.size() == 2);
  CHECK(result.diffusion == doctest::Approx(1.0));  // hbar*J/N default
  for (std::size_t i = 0; i < taus.size(); ++i) {
    // G = sqrt(D / (2 E[xi^2] tau)) with E[xi^2] = 1 for OU.
    CHECK(result.noise_couplings[i] ==
          doctest::Approx(std::sqrt(1.0 / (2.0 * taus[i]))).epsilon(1e-12));
    CHECK(result.ks[i].statistic >= 0.0);
    CHECK(result.ks[i].statistic <= 1.0);
  }

  const std::vector<double> ascending{0.01, 0.1};
  CHECK_THROWS_AS(homogenization_sweep(colored, psi0, ascending, config, 100, 1, 0), Error);
}
