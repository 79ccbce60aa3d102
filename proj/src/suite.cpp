#include "qsr/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace qsr {

namespace {

using nlohmann::json;

StateVector make_state(std::initializer_list<double> probabilities) {
  Vector v(static_cast<int>(probabilities.size()));
  int i = 0;
  for (double p : probabilities) v(i++) = std::sqrt(p);
  return StateVector(v);
}

ModelSpec white_spec(ModelVariant variant, int dim) {
  ModelSpec spec;
  spec.variant = variant;
  spec.projectors = ProjectorSet::canonical(dim);
  if (variant == ModelVariant::two_state_ito || variant == ModelVariant::two_state_stratonovich) {
    spec = derive_fdr_params(spec);
  } else {
    spec.fdr_enforced = true;
  }
  return spec;
}

Vector random_state(RandomStream& stream, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(stream.gaussian(), stream.gaussian());
  return v / v.norm();
}

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void emit(std::ostream* progress, const CheckResult& check) {
  if (progress) {
    *progress << (check.pass ? "[PASS] " : "[FAIL] ") << check.id << ": " << check.description
              << " (statistic " << check.statistic << ", bound " << check.threshold << ")\n";
  }
}

// --- 1 & 2: Born statistics, 3: martingale diagonals --------------------

void born_and_martingale(std::vector<CheckResult>& out, std::uint64_t seed, int workers,
                         std::ostream* progress) {
  IntegratorConfig config;
  config.dt = 0.01;
  config.t_max = 25.0;
  const std::vector<double> checkpoints{0.25, 0.5, 1.0};

  struct Case {
    const char* id;
    const char* description;
    ModelSpec spec;
    StateVector psi0;
  };
  const std::vector<Case> cases{
      {"born_two_state", "two-state white-noise collapse fractions reproduce |psi0_k|^2",
       white_spec(ModelVariant::two_state_ito, 2), make_state({0.8, 0.2})},
      {"born_n_state", "three-state collapse fractions reproduce |psi0_k|^2",
       white_spec(ModelVariant::n_state_ito, 3), make_state({0.5, 0.3, 0.2})},
  };

  double worst_martingale_ratio = 0.0;
  bool martingale_pass = true;
  json martingale_details = json::array();

  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& item = cases[c];
    const EnsembleSummary summary = run_ensemble(item.spec, item.psi0, config, 5000,
                                                 hash64(seed, c + 1), checkpoints, workers);
    const BornCheck born = born_check(summary, item.psi0);

    CheckResult check;
    check.id = item.id;
    check.description = item.description;
    check.pass = born.pass;
    double worst = 0.0;
    json fractions = json::array();
    for (std::size_t k = 0; k < born.observed.size(); ++k) {
      worst = std::max(worst, std::abs(born.observed[k] - born.expected[k]) /
                                  std::max(born.margin[k], 1e-300));
      fractions.push_back({{"state", k},
                           {"observed", born.observed[k]},
                           {"expected", born.expected[k]},
                           {"margin_3sigma", born.margin[k]}});
    }
    check.statistic = born.observed[0];
    check.threshold = fmt(born.expected[0]) + " +- " + fmt(born.margin[0]);
    check.details = {{"fractions", fractions},
                     {"unresolved", summary.unresolved_count},
                     {"m", summary.m_trajectories},
                     {"fingerprint", summary.fingerprint}};
    emit(progress, check);
    out.push_back(std::move(check));

    const MartingaleCheck martingale = martingale_check(summary, item.psi0);
    martingale_pass = martingale_pass && martingale.pass;
    for (std::size_t t = 0; t < martingale.mean.size(); ++t) {
      for (std::size_t k = 0; k < martingale.expected.size(); ++k) {
        const double ratio = std::abs(martingale.mean[t][k] - martingale.expected[k]) /
                             std::max(martingale.band[t][k], 1e-300);
        worst_martingale_ratio = std::max(worst_martingale_ratio, ratio);
        martingale_details.push_back({{"model", item.id},
                                      {"t", martingale.checkpoint_times[t]},
                                      {"state", k},
                                      {"mean", martingale.mean[t][k]},
                                      {"expected", martingale.expected[k]},
                                      {"band_3sigma", martingale.band[t][k]}});
      }
    }
  }

  CheckResult martingale;
  martingale.id = "martingale_diagonals";
  martingale.description = "ensemble means of <P_k> hold their initial values at all checkpoints";
  martingale.pass = martingale_pass;
  martingale.statistic = worst_martingale_ratio;
  martingale.threshold = "deviation/band < 1 at 3 sigma";
  martingale.details = {{"cells", martingale_details}};
  emit(progress, martingale);
  out.push_back(std::move(martingale));
}

// --- 4: GKSL decay oracle and ensemble-vs-master ------------------------

void gksl_against_ensemble(std::vector<CheckResult>& out, std::uint64_t seed, int workers,
                           std::ostream* progress) {
  const ModelSpec spec = white_spec(ModelVariant::two_state_ito, 2);
  const StateVector psi0 = make_state({0.8, 0.2});
  const DensityMatrix rho0 = pure_projector(psi0);

  MasterConfig mc;
  mc.dt = 1e-4;
  mc.t_max = 1.0;
  mc.record_stride = 10000;
  const MasterSeries series = integrate_master(spec, rho0, mc);
  const double expected = std::abs(rho0.mat()(0, 1)) * std::exp(-1.0);
  const double actual = std::abs(series.states.back().mat()(0, 1));
  const double rel_error = std::abs(actual - expected) / expected;

  CheckResult decay;
  decay.id = "gksl_decay";
  decay.description = "master coherence decays as e^{-rate t} against the closed form";
  decay.statistic = rel_error;
  decay.threshold = "relative error < 1e-6 at t = 1";
  decay.pass = rel_error < 1e-6;
  decay.details = {{"expected", expected}, {"actual", actual}};
  emit(progress, decay);
  out.push_back(std::move(decay));

  IntegratorConfig config;
  config.dt = 5e-4;
  config.t_max = 0.5;
  const ProjectorMoments moments =
      ensemble_mean_projector(spec, psi0, config, 0.5, 5000, hash64(seed, 4), workers);
  MasterConfig mc_half = mc;
  mc_half.t_max = 0.5;
  mc_half.record_stride = 5000;
  const MasterSeries half = integrate_master(spec, rho0, mc_half);
  const EnsembleMasterComparison comparison = compare_ensemble_to_master(
      moments.mean, moments.stderr_real, moments.stderr_imag, half.states.back());

  CheckResult mean_match;
  mean_match.id = "ensemble_vs_master";
  mean_match.description = "ensemble mean of |psi><psi| matches the master solution entrywise";
  mean_match.statistic = comparison.max_sigma_ratio;
  mean_match.threshold = "deviation within 3x Monte Carlo standard error";
  mean_match.pass = comparison.within_band;
  mean_match.details = {{"max_deviation", comparison.max_deviation},
                        {"t", moments.time},
                        {"m", moments.m}};
  emit(progress, mean_match);
  out.push_back(std::move(mean_match));
}

// --- 5: linearity of the noise-averaged evolution -----------------------

void linearity(std::vector<CheckResult>& out, std::uint64_t seed, std::ostream* progress) {
  const ModelSpec spec = white_spec(ModelVariant::n_state_ito, 3);
  MasterConfig mc;
  mc.dt = 1e-3;
  mc.t_max = 0.5;
  mc.record_stride = 500;
  RandomStream stream = RandomStream::derive(seed, 5);
  const double alpha = 0.3;

  double worst = 0.0;
  for (int pair = 0; pair < 10; ++pair) {
    const DensityMatrix a = pure_projector(StateVector(random_state(stream, 3)));
    const DensityMatrix b = pure_projector(StateVector(random_state(stream, 3)));
    const DensityMatrix mixed(alpha * a.mat() + (1.0 - alpha) * b.mat());
    const Matrix evolved_mix = integrate_master(spec, mixed, mc).states.back().mat();
    const Matrix mix_evolved = alpha * integrate_master(spec, a, mc).states.back().mat() +
                               (1.0 - alpha) * integrate_master(spec, b, mc).states.back().mat();
    worst = std::max(worst, (evolved_mix - mix_evolved).cwiseAbs().maxCoeff());
  }

  CheckResult check;
  check.id = "linearity";
  check.description = "master evolution of convex mixtures equals the mixture of evolutions";
  check.statistic = worst;
  check.threshold = "max entrywise deviation < 1e-10 over 10 random pairs";
  check.pass = worst < 1e-10;
  emit(progress, check);
  out.push_back(std::move(check));
}

// --- 6: noise oracles ----------------------------------------------------

void noise_oracles(std::vector<CheckResult>& out, std::uint64_t seed, int workers,
                   std::ostream* progress) {
  const double tau = 1.0;

  {  // OU stationary variance, exact kernel at decorrelating steps.
    std::vector<RandomStream> streams{RandomStream::derive(seed, 61)};
    ColoredNoiseState state;
    state.kind = NoiseKind::ou;
    state.correlation_time = tau;
    state.xi = {0.0};
    for (int i = 0; i < 100; ++i) ou_step(state, 3.0 * tau, streams);
    const int n = 1'000'000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      ou_step(state, 3.0 * tau, streams);
      sum += state.xi[0];
      sq += state.xi[0] * state.xi[0];
    }
    const double variance = sq / n - (sum / n) * (sum / n);
    CheckResult check;
    check.id = "ou_stationary_variance";
    check.description = "OU stationary variance equals 1";
    check.statistic = variance;
    check.threshold = "1 +- 1%";
    check.pass = std::abs(variance - 1.0) < 0.01;
    emit(progress, check);
    out.push_back(std::move(check));
  }

  auto autocorr_check = [&](NoiseKind kind, const char* id, double expected, double dt,
                            std::size_t batch_len) {
    std::vector<RandomStream> streams{RandomStream::derive(seed, kind == NoiseKind::ou ? 62 : 63)};
    ColoredNoiseState state;
    state.kind = kind;
    state.correlation_time = tau;
    state.xi = {stationary_sample(kind, streams[0])};
    const int burn = static_cast<int>(20.0 * tau / dt);
    for (int i = 0; i < burn; ++i) colored_noise_step(state, dt, streams);

    const int batches = 20;
    const auto lag_steps = static_cast<std::size_t>(std::llround(tau / dt));
    std::vector<double> estimates;
    std::vector<double> path(batch_len);
    for (int b = 0; b < batches; ++b) {
      for (auto& v : path) {
        colored_noise_step(state, dt, streams);
        v = state.xi[0];
      }
      estimates.push_back(autocorrelation_estimate(path, dt, tau)[lag_steps].second);
    }
    double mean = 0.0;
    for (double v : estimates) mean += v;
    mean /= batches;
    double var = 0.0;
    for (double v : estimates) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / (batches - 1.0) / batches);

    CheckResult check;
    check.id = id;
    check.description = std::string(noise_kind_name(kind)) + " autocorrelation at lag tau";
    check.statistic = mean;
    check.threshold = fmt(expected) + " +- " + fmt(3.0 * se) + " (3 sigma)";
    check.pass = std::abs(mean - expected) < 3.0 * se;
    check.details = {{"standard_error", se}};
    emit(progress, check);
    out.push_back(std::move(check));
  };
  autocorr_check(NoiseKind::ou, "ou_autocorrelation", std::exp(-1.0), 0.1 * tau, 50'000);
  autocorr_check(NoiseKind::sbm, "sbm_autocorrelation", std::exp(-1.0) / 3.0, 0.01 * tau, 100'000);

  {  // SBM stationary histogram against the uniform law.
    const double dt = tau / 100.0;
    std::vector<RandomStream> streams{RandomStream::derive(seed, 64)};
    ColoredNoiseState state;
    state.kind = NoiseKind::sbm;
    state.correlation_time = tau;
    state.xi = {0.0};
    for (int i = 0; i < 2000; ++i) sbm_step(state, dt, streams);
    std::vector<double> samples;
    const int total = 1'000'000;
    const int stride = 300;
    samples.reserve(total / stride);
    for (int i = 0; i < total; ++i) {
      sbm_step(state, dt, streams);
      if (i % stride == 0) samples.push_back(state.xi[0]);
    }
    const ChiSquareResult result = chi_square_uniform(samples, -1.0, 1.0, 20);
    CheckResult check;
    check.id = "sbm_stationary_uniform";
    check.description = "SBM stationary histogram is uniform on [-1, 1]";
    check.statistic = result.statistic;
    check.threshold = "chi-square < " + fmt(result.critical_value) + " (5%, 19 dof)";
    check.pass = result.pass;
    check.details = {{"samples", samples.size()}};
    emit(progress, check);
    out.push_back(std::move(check));
  }

  {  // Transition density: Monte Carlo histogram vs the truncated series.
    const double xi0 = 0.5;
    const double horizon = 0.5 * tau;
    const int em_steps = 512;
    const double dt = horizon / em_steps;
    const int n_samples = 1'000'000;
    const int bins = 20;

    std::vector<double> finals(n_samples);
    parallel_for_indices(n_samples, workers, [&](std::uint64_t i) {
      std::vector<RandomStream> s{RandomStream::derive(hash64(seed, 65), i)};
      ColoredNoiseState c;
      c.kind = NoiseKind::sbm;
      c.correlation_time = tau;
      c.xi = {xi0};
      for (int k = 0; k < em_steps; ++k) sbm_step(c, dt, s);
      finals[i] = c.xi[0];
    });
    std::vector<double> observed(bins, 0.0);
    for (double v : finals) {
      observed[std::min(bins - 1, static_cast<int>((v + 1.0) / 2.0 * bins))] += 1.0;
    }
    std::vector<double> expected(bins, 0.0);
    for (int b = 0; b < bins; ++b) {
      const double lo = -1.0 + 2.0 * b / bins;
      const double width = 2.0 / bins;
      // 64-interval Simpson per bin.
      double acc = sbm_transition_density(lo, xi0, horizon, tau, 30) +
                   sbm_transition_density(lo + width, xi0, horizon, tau, 30);
      for (int i = 1; i < 64; ++i) {
        acc += sbm_transition_density(lo + width * i / 64.0, xi0, horizon, tau, 30) *
               (i % 2 ? 4.0 : 2.0);
      }
      expected[b] = n_samples * acc * (width / 64.0) / 3.0;
    }
    const ChiSquareResult result = chi_square_vs_expected(observed, expected);
    CheckResult check;
    check.id = "sbm_transition_density";
    check.description = "SBM Monte Carlo histogram matches the truncated Legendre series";
    check.statistic = result.statistic;
    check.threshold = "chi-square < " + fmt(result.critical_value) + " (5%, 19 dof)";
    check.pass = result.pass;
    check.details = {{"samples", n_samples}, {"em_steps", em_steps}};
    emit(progress, check);
    out.push_back(std::move(check));
  }
}

// --- 7: homogenization sweep ---------------------------------------------

void homogenization(std::vector<CheckResult>& out, std::uint64_t seed, int workers,
                    std::ostream* progress) {
  const StateVector psi0 = make_state({0.8, 0.2});
  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_max = 0.5;
  const std::vector<double> taus{0.1, 0.03, 0.01};

  for (NoiseKind kind : {NoiseKind::ou, NoiseKind::sbm}) {
    ModelSpec colored;
    colored.variant = ModelVariant::colored_n_state;
    colored.projectors = ProjectorSet::canonical(2);
    colored.noise_kind = kind;
    colored.correlation_time = taus.front();

    const HomogenizationResult result =
        homogenization_sweep(colored, psi0, taus, config, 2000,
                             hash64(seed, kind == NoiseKind::ou ? 71 : 72), workers,
                             /*repetitions=*/8);

    CheckResult check;
    check.id = std::string("homogenization_") + noise_kind_name(kind);
    check.description = std::string("law of <P_0> converges to the white-noise reference (") +
                        noise_kind_name(kind) + " noise)";
    check.statistic = result.ks.back().statistic;
    check.threshold = "mean KS strictly decreasing over 8 sweeps; final comparison < " +
                      fmt(result.ks.back().critical_value);
    check.pass = result.strictly_decreasing && result.smallest_tau_pass;
    json ks_list = json::array();
    for (std::size_t i = 0; i < taus.size(); ++i) {
      ks_list.push_back({{"tau", taus[i]},
                         {"ks_first", result.ks[i].statistic},
                         {"ks_mean", result.mean_ks[i]},
                         {"critical", result.ks[i].critical_value},
                         {"noise_coupling", result.noise_couplings[i]}});
    }
    check.details = {{"sweep", ks_list},
                     {"diffusion", result.diffusion},
                     {"repetitions", result.repetitions}};
    emit(progress, check);
    out.push_back(std::move(check));
  }
}

// --- 8: energy conservation -----------------------------------------------

void energy_conservation(std::vector<CheckResult>& out, std::uint64_t seed,
                         std::ostream* progress) {
  // Commuting Hamiltonian: the rate vanishes identically and the
  // master-evolved energy stays constant.
  ModelSpec block_spec = white_spec(ModelVariant::n_state_ito, 4);
  block_spec.projectors = ProjectorSet::from_index_groups(4, {{0, 1}, {2, 3}});
  Matrix h_block = Matrix::Zero(4, 4);
  h_block(0, 0) = 0.7;
  h_block(0, 1) = 0.4;
  h_block(1, 0) = 0.4;
  h_block(1, 1) = -0.2;
  h_block(2, 3) = Complex(0.0, 0.9);
  h_block(3, 2) = Complex(0.0, -0.9);
  block_spec.hamiltonian = HermitianOperator(h_block);

  RandomStream stream = RandomStream::derive(seed, 8);
  double worst_rate = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const DensityMatrix rho = pure_projector(StateVector(random_state(stream, 4)));
    worst_rate = std::max(worst_rate, std::abs(energy_rate(block_spec, rho)));
  }

  MasterConfig mc;
  mc.dt = 1e-3;
  mc.t_max = 1.0;
  mc.record_stride = 100;
  const DensityMatrix rho0 = pure_projector(StateVector(random_state(stream, 4)));
  const MasterSeries series = integrate_master(block_spec, rho0, mc);
  const double e0 = (rho0.mat() * h_block).trace().real();
  double worst_drift = 0.0;
  for (const auto& state : series.states) {
    worst_drift = std::max(worst_drift, std::abs((state.mat() * h_block).trace().real() - e0));
  }

  // Non-commuting fixture: H = sigma_x on |+><+| pumps energy at rate -1.
  ModelSpec sx_spec = white_spec(ModelVariant::n_state_ito, 2);
  Matrix sx(2, 2);
  sx << 0.0, 1.0, 1.0, 0.0;
  sx_spec.hamiltonian = HermitianOperator(sx);
  const double rate = energy_rate(sx_spec, pure_projector(make_state({0.5, 0.5})));

  CheckResult check;
  check.id = "energy_conservation";
  check.description = "commuting Hamiltonians conserve energy exactly; sigma_x fixture gives -1";
  check.statistic = worst_drift;
  check.threshold = "rate exactly 0; Tr[rho H] drift < 1e-10; fixture within 1e-12 of -1";
  check.pass = worst_rate == 0.0 && worst_drift < 1e-10 && std::abs(rate + 1.0) < 1e-12;
  check.details = {{"max_commuting_rate", worst_rate},
                   {"max_energy_drift", worst_drift},
                   {"sigma_x_rate", rate}};
  emit(progress, check);
  out.push_back(std::move(check));
}

// --- 9: FDR necessity -------------------------------------------------------

void fdr_necessity(std::vector<CheckResult>& out, std::uint64_t seed, int workers,
                   std::ostream* progress) {
  const StateVector psi0 = make_state({0.8, 0.2});
  IntegratorConfig config;
  config.dt = 0.01;
  config.t_max = 25.0;
  const std::vector<double> checkpoints{0.25, 0.5, 1.0};
  const std::uint64_t run_seed = hash64(seed, 9);

  ModelSpec tuned = white_spec(ModelVariant::two_state_stratonovich, 2);
  const EnsembleSummary good = run_ensemble(tuned, psi0, config, 5000, run_seed, checkpoints, workers);
  const MartingaleCheck good_check = martingale_check(good, psi0);

  ModelSpec detuned = tuned;
  detuned.diffusion = 2.0 * tuned.diffusion;
  detuned.fdr_enforced = false;
  const EnsembleSummary bad =
      run_ensemble(detuned, psi0, config, 5000, run_seed, checkpoints, workers);
  const MartingaleCheck bad_check = martingale_check(bad, psi0);

  CheckResult check;
  check.id = "fdr_necessity";
  check.description =
      "martingale diagonals hold under the FDR and fail with the diffusion doubled (same seeds)";
  check.statistic = bad_check.mean.back()[0];
  check.threshold = "pass with FDR on, fail with 2x diffusion";
  check.pass = good_check.pass && !bad_check.pass;
  check.details = {{"fdr_on_t1_mean", good_check.mean.back()[0]},
                   {"fdr_broken_t1_mean", bad_check.mean.back()[0]},
                   {"expected", 0.8}};
  emit(progress, check);
  out.push_back(std::move(check));
}

// --- 10: structural suites ---------------------------------------------------

void structural(std::vector<CheckResult>& out, std::uint64_t seed, int workers,
                std::ostream* progress) {
  // Projector algebra on a canonical and a block set.
  double algebra_dev = 0.0;
  for (const ProjectorSet& set :
       {ProjectorSet::canonical(5), ProjectorSet::from_index_groups(6, {{0, 3}, {1, 4, 5}, {2}})}) {
    Matrix sum = Matrix::Zero(set.dim(), set.dim());
    for (int k = 0; k < set.size(); ++k) {
      const Matrix pk = set.matrix(k);
      sum += pk;
      algebra_dev = std::max(algebra_dev, (pk * pk - pk).cwiseAbs().maxCoeff());
      for (int j = 0; j < k; ++j) {
        algebra_dev = std::max(algebra_dev, (pk * set.matrix(j)).cwiseAbs().maxCoeff());
      }
    }
    algebra_dev =
        std::max(algebra_dev, (sum - Matrix::Identity(set.dim(), set.dim())).cwiseAbs().maxCoeff());
  }

  // Stratonovich-to-Ito conversion on random states.
  RandomStream stream = RandomStream::derive(seed, 10);
  double conversion_dev = 0.0;
  {
    ModelSpec strat = white_spec(ModelVariant::n_state_stratonovich, 5);
    ModelSpec ito = strat;
    ito.variant = ModelVariant::n_state_ito;
    for (int trial = 0; trial < 100; ++trial) {
      const Vector psi = random_state(stream, 5);
      const Vector converted =
          n_state_stratonovich_terms(strat, psi).drift + stratonovich_correction(strat, psi);
      conversion_dev =
          std::max(conversion_dev, max_abs(converted - n_state_ito_terms(ito, psi).drift));
    }
    ModelSpec strat2 = white_spec(ModelVariant::two_state_stratonovich, 2);
    ModelSpec ito2 = strat2;
    ito2.variant = ModelVariant::two_state_ito;
    for (int trial = 0; trial < 100; ++trial) {
      const Vector psi = random_state(stream, 2);
      const Vector converted =
          two_state_stratonovich_terms(strat2, psi).drift + stratonovich_correction(strat2, psi);
      conversion_dev =
          std::max(conversion_dev, max_abs(converted - two_state_ito_terms(ito2, psi).drift));
    }
  }

  // Fixed points at every collapsed state for N <= 16.
  double fixed_point_dev = 0.0;
  for (int dim = 2; dim <= 16; ++dim) {
    ModelSpec strat = white_spec(ModelVariant::n_state_stratonovich, dim);
    ModelSpec ito = white_spec(ModelVariant::n_state_ito, dim);
    for (int j = 0; j < dim; ++j) {
      Vector basis = Vector::Zero(dim);
      basis(j) = 1.0;
      for (const TermPair& terms :
           {n_state_stratonovich_terms(strat, basis), n_state_ito_terms(ito, basis)}) {
        fixed_point_dev = std::max(fixed_point_dev, max_abs(terms.drift));
        for (const auto& d : terms.diffusion) fixed_point_dev = std::max(fixed_point_dev, max_abs(d));
      }
    }
  }

  // Determinism: identical summaries at any worker count.
  const ModelSpec spec = white_spec(ModelVariant::two_state_ito, 2);
  const StateVector psi0 = make_state({0.8, 0.2});
  IntegratorConfig config;
  config.dt = 0.01;
  config.t_max = 25.0;
  const std::vector<double> checkpoints{0.5, 1.0};
  const std::uint64_t run_seed = hash64(seed, 1010);
  const EnsembleSummary serial = run_ensemble(spec, psi0, config, 500, run_seed, checkpoints, 1);
  const EnsembleSummary parallel =
      run_ensemble(spec, psi0, config, 500, run_seed, checkpoints, workers > 0 ? workers : 0);
  bool identical = serial.fingerprint == parallel.fingerprint &&
                   serial.outcome_counts == parallel.outcome_counts &&
                   serial.unresolved_count == parallel.unresolved_count;
  for (std::size_t c = 0; identical && c < serial.checkpoint_means.size(); ++c) {
    identical = serial.checkpoint_means[c] == parallel.checkpoint_means[c] &&
                serial.checkpoint_stddevs[c] == parallel.checkpoint_stddevs[c];
  }

  CheckResult check;
  check.id = "structural_identities";
  check.description =
      "projector algebra, Stratonovich-to-Ito conversion, collapsed fixed points, scheduling "
      "determinism";
  check.statistic = std::max({algebra_dev, conversion_dev, fixed_point_dev});
  check.threshold = "algebra/conversion < 1e-12; fixed points exact; reruns identical";
  check.pass =
      algebra_dev < 1e-12 && conversion_dev < 1e-12 && fixed_point_dev == 0.0 && identical;
  check.details = {{"projector_algebra_deviation", algebra_dev},
                   {"conversion_deviation", conversion_dev},
                   {"fixed_point_deviation", fixed_point_dev},
                   {"worker_invariance", identical}};
  emit(progress, check);
  out.push_back(std::move(check));
}

}  // namespace

SuiteReport run_acceptance_suite(std::uint64_t master_seed, int workers, std::ostream* progress) {
  const auto t_start = std::chrono::steady_clock::now();
  SuiteReport report;
  report.master_seed = master_seed;

  born_and_martingale(report.checks, master_seed, workers, progress);
  gksl_against_ensemble(report.checks, master_seed, workers, progress);
  linearity(report.checks, master_seed, progress);
  noise_oracles(report.checks, master_seed, workers, progress);
  homogenization(report.checks, master_seed, workers, progress);
  energy_conservation(report.checks, master_seed, progress);
  fdr_necessity(report.checks, master_seed, workers, progress);
  structural(report.checks, master_seed, workers, progress);

  report.all_pass = true;
  for (const auto& check : report.checks) report.all_pass = report.all_pass && check.pass;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

nlohmann::json suite_report_to_json(const SuiteReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& check : report.checks) {
    checks.push_back({{"id", check.id},
                      {"description", check.description},
                      {"statistic", check.statistic},
                      {"threshold", check.threshold},
                      {"pass", check.pass},
                      {"details", check.details}});
  }
  return {{"version", kVersion},
          {"master_seed", report.master_seed},
          {"all_pass", report.all_pass},
          {"checks", checks}};
}

}  // namespace qsr
