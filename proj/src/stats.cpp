#include "qsr/stats.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace qsr {

void parallel_for_indices(std::uint64_t n, int workers,
                          const std::function<void(std::uint64_t)>& body) {
  if (n == 0) return;
  int w = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  w = std::max(1, std::min<int>(w, static_cast<int>(std::min<std::uint64_t>(n, 1024))));

  if (w == 1) {
    for (std::uint64_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::uint64_t> next{0};
  std::mutex fail_mutex;
  std::uint64_t failed_index = n;
  std::exception_ptr failure;

  auto worker = [&]() {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(w);
  for (int t = 0; t < w; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace

// |psi0_k|^2 with the same arithmetic the trajectory engine uses for its
// population readout, so zero-variance checkpoints compare bit-for-bit.
static std::vector<double> initial_populations(const StateVector& psi0) {
  std::vector<double> probs(psi0.dim());
  for (int i = 0; i < psi0.dim(); ++i) probs[i] = std::norm(psi0[i]);
  const double n2 = psi0.vec().squaredNorm();
  if (n2 != 1.0) {
    for (double& p : probs) p /= n2;
  }
  return probs;
}

std::string canonical_run_description(const ModelSpec& spec, const IntegratorConfig& config,
                                      std::uint64_t m, std::uint64_t master_seed) {
  std::string s;
  s += "variant=" + std::string(variant_name(spec.variant));
  s += ";dim=" + std::to_string(spec.dim());
  s += ";groups=";
  for (int k = 0; k < spec.projectors.size(); ++k) {
    if (k) s += "|";
    for (std::size_t i = 0; i < spec.projectors.indices(k).size(); ++i) {
      if (i) s += ",";
      s += std::to_string(spec.projectors.indices(k)[i]);
    }
  }
  s += ";coupling=" + fmt(spec.coupling);
  s += ";system_size=" + fmt(spec.system_size);
  s += ";hbar=" + fmt(spec.hbar);
  s += ";diffusion=" + fmt(spec.diffusion);
  s += ";noise_coupling=" + fmt(spec.noise_coupling);
  s += ";correlation_time=" + fmt(spec.correlation_time);
  s += ";noise_kind=" + std::string(noise_kind_name(spec.noise_kind));
  s += ";fdr=" + std::to_string(spec.fdr_enforced ? 1 : 0);
  if (spec.hamiltonian) {
    s += ";hamiltonian=";
    const Matrix& h = spec.hamiltonian->mat();
    for (int i = 0; i < h.rows(); ++i) {
      for (int j = 0; j < h.cols(); ++j) {
        s += fmt(h(i, j).real()) + "+" + fmt(h(i, j).imag()) + "i,";
      }
    }
  }
  s += ";dt=" + fmt(config.dt);
  s += ";t_max=" + fmt(config.t_max);
  s += ";renorm=" + std::to_string(config.renormalize_each_step ? 1 : 0);
  s += ";collapse_epsilon=" + fmt(config.collapse_epsilon);
  s += ";record_stride=" + std::to_string(config.record_stride);
  s += ";stop_on_collapse=" + std::to_string(config.stop_on_collapse ? 1 : 0);
  s += ";m=" + std::to_string(m);
  s += ";master_seed=" + std::to_string(master_seed);
  return s;
}

EnsembleSummary run_ensemble(const ModelSpec& spec, const StateVector& psi0,
                             const IntegratorConfig& config, std::uint64_t m,
                             std::uint64_t master_seed,
                             const std::vector<double>& checkpoint_times, int workers) {
  if (m < 1) throw Error(ErrorCode::invalid_argument, "run_ensemble requires m >= 1");
  spec.validate();
  config.validate();

  const auto t_start = std::chrono::steady_clock::now();
  const double dt = config.dt > 0.0 ? config.dt : default_dt(spec);
  const int n_groups = spec.projectors.size();

  // Snap checkpoints to the step grid.
  std::vector<std::uint64_t> cp_steps;
  cp_steps.reserve(checkpoint_times.size());
  for (double ct : checkpoint_times) {
    if (ct < 0.0 || ct > config.t_max * (1.0 + 1e-9)) {
      throw Error(ErrorCode::invalid_argument,
                  "checkpoint time " + std::to_string(ct) + " outside [0, t_max]");
    }
    cp_steps.push_back(static_cast<std::uint64_t>(std::llround(ct / dt)));
  }

  std::vector<int> outcomes(m, -1);
  // Flat [trajectory][checkpoint][group] layout, filled by index.
  std::vector<double> cp_values(m * cp_steps.size() * n_groups, 0.0);

  parallel_for_indices(m, workers, [&](std::uint64_t i) {
    TrajectoryEngine engine(spec, psi0, config, i, master_seed);
    std::vector<double> pops;
    std::size_t next_cp = 0;
    auto capture_through = [&](std::uint64_t step) {
      while (next_cp < cp_steps.size() && cp_steps[next_cp] <= step) {
        engine.populations(pops);
        for (int k = 0; k < n_groups; ++k) {
          cp_values[(i * cp_steps.size() + next_cp) * n_groups + k] = pops[k];
        }
        ++next_cp;
      }
    };
    capture_through(0);
    while (!engine.finished()) {
      engine.advance();
      capture_through(engine.steps_taken());
    }
    // Early termination carries the final populations forward.
    capture_through(~std::uint64_t{0});
    outcomes[i] = engine.outcome().value_or(-1);
  });

  EnsembleSummary summary;
  summary.m_trajectories = m;
  summary.master_seed = master_seed;
  summary.outcome_counts.assign(n_groups, 0);
  for (std::uint64_t i = 0; i < m; ++i) {
    if (outcomes[i] < 0) {
      ++summary.unresolved_count;
    } else {
      ++summary.outcome_counts[outcomes[i]];
    }
  }

  summary.checkpoint_times.reserve(cp_steps.size());
  for (auto s : cp_steps) summary.checkpoint_times.push_back(static_cast<double>(s) * dt);
  summary.checkpoint_means.assign(cp_steps.size(), std::vector<double>(n_groups, 0.0));
  summary.checkpoint_stddevs.assign(cp_steps.size(), std::vector<double>(n_groups, 0.0));
  for (std::size_t c = 0; c < cp_steps.size(); ++c) {
    for (int k = 0; k < n_groups; ++k) {
      // Shifted two-pass moments: exact (mean == value, stddev == 0) when all
      // trajectories report the identical value, as at the t = 0 checkpoint.
      const double shift = cp_values[c * n_groups + k];
      double sum = 0.0;
      for (std::uint64_t i = 0; i < m; ++i) {
        sum += cp_values[(i * cp_steps.size() + c) * n_groups + k] - shift;
      }
      const double shifted_mean = sum / static_cast<double>(m);
      double sq = 0.0;
      for (std::uint64_t i = 0; i < m; ++i) {
        const double d =
            cp_values[(i * cp_steps.size() + c) * n_groups + k] - shift - shifted_mean;
        sq += d * d;
      }
      summary.checkpoint_means[c][k] = shift + shifted_mean;
      summary.checkpoint_stddevs[c][k] =
          m > 1 ? std::sqrt(sq / static_cast<double>(m - 1)) : 0.0;
    }
  }

  summary.fingerprint =
      hex64(fnv1a64(canonical_run_description(spec, config, m, master_seed)));
  summary.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return summary;
}

BornCheck born_check(const EnsembleSummary& summary, const StateVector& psi0) {
  const double m = static_cast<double>(summary.m_trajectories);
  const double unresolved_fraction = static_cast<double>(summary.unresolved_count) / m;
  if (unresolved_fraction >= 0.01) {
    throw Error(ErrorCode::invalid_state,
                "born_check: " + std::to_string(summary.unresolved_count) + " of " +
                    std::to_string(summary.m_trajectories) +
                    " trajectories unresolved; increase t_max");
  }
  const auto n_groups = summary.outcome_counts.size();

  BornCheck check;
  check.pass = true;
  check.observed.resize(n_groups);
  check.margin.resize(n_groups);
  check.expected = initial_populations(psi0);
  // The summary does not carry the projector layout; outcome counting per
  // basis index assumes rank-1 canonical sets.
  if (n_groups != check.expected.size()) {
    throw Error(ErrorCode::invalid_argument,
                "born_check supports canonical rank-1 projector sets only");
  }
  for (std::size_t k = 0; k < n_groups; ++k) {
    check.observed[k] = static_cast<double>(summary.outcome_counts[k]) / m;
  }
  for (std::size_t k = 0; k < n_groups; ++k) {
    const double p = check.expected[k];
    check.margin[k] = 3.0 * std::sqrt(p * (1.0 - p) / m);
    if (std::abs(check.observed[k] - p) > check.margin[k]) check.pass = false;
  }
  return check;
}

MartingaleCheck martingale_check(const EnsembleSummary& summary, const StateVector& psi0) {
  MartingaleCheck check;
  check.pass = true;
  check.checkpoint_times = summary.checkpoint_times;
  check.expected = initial_populations(psi0);
  if (!summary.checkpoint_means.empty() &&
      summary.checkpoint_means.front().size() != check.expected.size()) {
    throw Error(ErrorCode::invalid_argument,
                "martingale_check supports canonical rank-1 projector sets only");
  }
  const double sqrt_m = std::sqrt(static_cast<double>(summary.m_trajectories));
  check.mean = summary.checkpoint_means;
  check.band.resize(summary.checkpoint_means.size());
  for (std::size_t c = 0; c < summary.checkpoint_means.size(); ++c) {
    check.band[c].resize(check.expected.size());
    for (std::size_t k = 0; k < check.expected.size(); ++k) {
      check.band[c][k] = 3.0 * summary.checkpoint_stddevs[c][k] / sqrt_m;
      if (std::abs(summary.checkpoint_means[c][k] - check.expected[k]) > check.band[c][k]) {
        check.pass = false;
      }
    }
  }
  return check;
}

KSResult ks_statistic(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::invalid_argument, "ks_statistic requires nonempty samples");
  }
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  double d = 0.0;
  std::size_t ia = 0;
  std::size_t ib = 0;
  while (ia < sa.size() && ib < sb.size()) {
    const double x = std::min(sa[ia], sb[ib]);
    while (ia < sa.size() && sa[ia] <= x) ++ia;
    while (ib < sb.size() && sb[ib] <= x) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }

  KSResult result;
  result.statistic = d;
  result.n_a = sa.size();
  result.n_b = sb.size();
  result.alpha = alpha;
  const double c_alpha = std::sqrt(-0.5 * std::log(alpha / 2.0));
  result.critical_value = c_alpha * std::sqrt((na + nb) / (na * nb));
  result.pass = d < result.critical_value;
  return result;
}

double regularized_gamma_q(double s, double x) {
  if (!(s > 0.0) || x < 0.0) {
    throw Error(ErrorCode::invalid_argument, "regularized_gamma_q requires s > 0, x >= 0");
  }
  if (x == 0.0) return 1.0;
  if (x < s + 1.0) {
    // Lower series, Q = 1 - P.
    double term = 1.0 / s;
    double sum = term;
    double a = s;
    for (int n = 0; n < 500; ++n) {
      a += 1.0;
      term *= x / a;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    const double p = sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
    return 1.0 - p;
  }
  // Continued fraction (modified Lentz).
  const double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int n = 1; n <= 500; ++n) {
    const double an = -n * (n - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

double chi_square_critical(int dof, double alpha) {
  if (dof < 1 || !(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "chi_square_critical requires dof >= 1, alpha in (0,1)");
  }
  double lo = 0.0;
  double hi = dof + 20.0 * std::sqrt(2.0 * dof) + 20.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_gamma_q(dof / 2.0, mid / 2.0) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ChiSquareResult chi_square_vs_expected(std::span<const double> observed_counts,
                                       std::span<const double> expected_counts, double alpha) {
  if (observed_counts.size() != expected_counts.size() || observed_counts.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "chi_square_vs_expected: need matching bins (>= 2)");
  }
  ChiSquareResult result;
  result.dof = static_cast<int>(observed_counts.size()) - 1;
  result.alpha = alpha;
  for (std::size_t i = 0; i < observed_counts.size(); ++i) {
    if (!(expected_counts[i] > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "chi_square_vs_expected: expected counts must be > 0");
    }
    const double d = observed_counts[i] - expected_counts[i];
    result.statistic += d * d / expected_counts[i];
  }
  result.critical_value = chi_square_critical(result.dof, alpha);
  result.pass = result.statistic < result.critical_value;
  return result;
}

ChiSquareResult chi_square_uniform(std::span<const double> samples, double lo, double hi, int bins,
                                   double alpha) {
  if (bins < 2 || !(hi > lo)) {
    throw Error(ErrorCode::invalid_argument, "chi_square_uniform: need bins >= 2 and hi > lo");
  }
  std::vector<double> observed(bins, 0.0);
  std::size_t used = 0;
  for (double v : samples) {
    if (v < lo || v > hi) continue;
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    observed[b] += 1.0;
    ++used;
  }
  std::vector<double> expected(bins, static_cast<double>(used) / bins);
  return chi_square_vs_expected(observed, expected, alpha);
}

std::vector<std::pair<double, double>> autocorrelation_estimate(std::span<const double> path,
                                                                double dt, double max_lag) {
  if (!(dt > 0.0) || max_lag < 0.0) {
    throw Error(ErrorCode::invalid_argument, "autocorrelation_estimate: dt > 0 and max_lag >= 0");
  }
  const auto max_steps = static_cast<std::size_t>(std::llround(max_lag / dt));
  if (path.size() < 10 * (max_steps + 1)) {
    throw Error(ErrorCode::invalid_argument,
                "autocorrelation_estimate: path of " + std::to_string(path.size()) +
                    " samples too short for lag window of " + std::to_string(max_steps) + " steps");
  }
  const double n = static_cast<double>(path.size());
  double mean = 0.0;
  for (double v : path) mean += v;
  mean /= n;

  std::vector<std::pair<double, double>> out;
  out.reserve(max_steps + 1);
  for (std::size_t lag = 0; lag <= max_steps; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < path.size(); ++i) {
      acc += (path[i] - mean) * (path[i + lag] - mean);
    }
    out.emplace_back(static_cast<double>(lag) * dt, acc / n);
  }
  return out;
}

namespace {

IntegratorConfig fixed_time_config(const IntegratorConfig& config, double t_target) {
  IntegratorConfig c = config;
  c.stop_on_collapse = false;
  if (!(t_target > 0.0) || t_target > c.t_max * (1.0 + 1e-9)) {
    throw Error(ErrorCode::invalid_argument, "target time outside (0, t_max]");
  }
  return c;
}

}  // namespace

std::vector<double> ensemble_population_samples(const ModelSpec& spec, const StateVector& psi0,
                                                const IntegratorConfig& config, int k,
                                                double t_target, std::uint64_t m,
                                                std::uint64_t master_seed, int workers) {
  if (k < 0 || k >= spec.projectors.size()) {
    throw Error(ErrorCode::invalid_argument, "population index out of range");
  }
  const IntegratorConfig run_config = fixed_time_config(config, t_target);
  const double dt = run_config.dt > 0.0 ? run_config.dt : default_dt(spec);
  const auto target_step = static_cast<std::uint64_t>(std::llround(t_target / dt));

  std::vector<double> samples(m, 0.0);
  parallel_for_indices(m, workers, [&](std::uint64_t i) {
    TrajectoryEngine engine(spec, psi0, run_config, i, master_seed);
    std::vector<double> pops;
    while (!engine.finished() && engine.steps_taken() < target_step) engine.advance();
    engine.populations(pops);
    samples[i] = pops[k];
  });
  return samples;
}

ProjectorMoments ensemble_mean_projector(const ModelSpec& spec, const StateVector& psi0,
                                         const IntegratorConfig& config, double t_target,
                                         std::uint64_t m, std::uint64_t master_seed, int workers) {
  const IntegratorConfig run_config = fixed_time_config(config, t_target);
  const double dt = run_config.dt > 0.0 ? run_config.dt : default_dt(spec);
  const auto target_step = static_cast<std::uint64_t>(std::llround(t_target / dt));
  const int n = spec.dim();

  std::vector<Matrix> projectors(m);
  parallel_for_indices(m, workers, [&](std::uint64_t i) {
    TrajectoryEngine engine(spec, psi0, run_config, i, master_seed);
    while (!engine.finished() && engine.steps_taken() < target_step) engine.advance();
    const Vector psi = normalize_vector(engine.psi());
    projectors[i] = psi * psi.adjoint();
  });

  ProjectorMoments moments;
  moments.time = static_cast<double>(target_step) * dt;
  moments.m = m;
  moments.mean = Matrix::Zero(n, n);
  for (const auto& p : projectors) moments.mean += p;
  moments.mean /= static_cast<double>(m);

  Eigen::MatrixXd var_re = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd var_im = Eigen::MatrixXd::Zero(n, n);
  for (const auto& p : projectors) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const Complex d = p(i, j) - moments.mean(i, j);
        var_re(i, j) += d.real() * d.real();
        var_im(i, j) += d.imag() * d.imag();
      }
    }
  }
  const double denom = m > 1 ? static_cast<double>(m - 1) : 1.0;
  moments.stderr_real = (var_re / denom / static_cast<double>(m)).cwiseSqrt();
  moments.stderr_imag = (var_im / denom / static_cast<double>(m)).cwiseSqrt();
  return moments;
}

HomogenizationResult homogenization_sweep(const ModelSpec& colored_template,
                                          const StateVector& psi0,
                                          const std::vector<double>& tau_list,
                                          const IntegratorConfig& config, std::uint64_t m,
                                          std::uint64_t master_seed, int workers,
                                          int repetitions) {
  if (colored_template.variant != ModelVariant::colored_n_state) {
    throw Error(ErrorCode::invalid_argument, "homogenization_sweep requires a colored template");
  }
  if (tau_list.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "homogenization_sweep requires >= 2 tau values");
  }
  for (std::size_t i = 1; i < tau_list.size(); ++i) {
    if (!(tau_list[i] < tau_list[i - 1]) || !(tau_list[i] > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "tau_list must be strictly descending and positive");
    }
  }
  if (repetitions < 1) {
    throw Error(ErrorCode::invalid_argument, "homogenization_sweep requires repetitions >= 1");
  }

  HomogenizationResult result;
  result.tau_list = tau_list;
  result.repetitions = repetitions;
  result.diffusion = colored_template.diffusion != 0.0
                         ? colored_template.diffusion
                         : colored_template.hbar * colored_template.coupling /
                               colored_template.system_size;

  // White-noise reference at matched coupling, oversized to push the KS
  // sampling floor below the tau dependence; its seed is independent of
  // every repetition seed.
  ModelSpec white = colored_template;
  white.variant = ModelVariant::n_state_ito;
  white.diffusion = 0.0;
  white.noise_coupling = 0.0;
  white.correlation_time = 0.0;
  white.fdr_enforced = true;
  const double t_target = config.t_max;
  const std::vector<double> reference = ensemble_population_samples(
      white, psi0, config, 0, t_target, 10 * m, hash64(master_seed, 0x5eedcafe), workers);

  result.mean_ks.assign(tau_list.size(), 0.0);
  for (int rep = 0; rep < repetitions; ++rep) {
    const std::uint64_t rep_seed = repetitions == 1 ? master_seed : hash64(master_seed, rep);
    for (std::size_t i = 0; i < tau_list.size(); ++i) {
      ModelSpec colored = colored_template;
      colored.correlation_time = tau_list[i];
      colored.diffusion = result.diffusion;
      colored.noise_coupling = 0.0;  // rescaled per tau at fixed diffusion
      colored.fdr_enforced = false;
      colored = derive_fdr_params(colored);
      if (rep == 0) result.noise_couplings.push_back(colored.noise_coupling);

      // Hold dt/tau fixed across the sweep: the Euler-Maruyama bias of the
      // noise process (stationary variance 1/(3-dt/tau) for SBM) is then
      // uniform in tau and cancels from the monotonicity comparison.
      IntegratorConfig tau_config = config;
      const double dt = tau_config.dt > 0.0 ? tau_config.dt : default_dt(colored);
      tau_config.dt = std::min(dt, tau_list[i] / 100.0);

      const std::vector<double> samples = ensemble_population_samples(
          colored, psi0, tau_config, 0, t_target, m, rep_seed, workers);
      const KSResult ks = ks_statistic(samples, reference);
      if (rep == 0) result.ks.push_back(ks);
      result.mean_ks[i] += ks.statistic / repetitions;
    }
  }

  result.strictly_decreasing = true;
  for (std::size_t i = 1; i < result.mean_ks.size(); ++i) {
    if (!(result.mean_ks[i] < result.mean_ks[i - 1])) {
      result.strictly_decreasing = false;
    }
  }
  result.smallest_tau_pass = result.ks.back().pass;
  return result;
}

}  // namespace qsr
