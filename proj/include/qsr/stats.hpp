#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsr/master.hpp"
#include "qsr/sde.hpp"

namespace qsr {

// Runs a function over indices [0, n) on a worker pool. Work is addressed by
// index, so results are independent of scheduling; workers <= 0 selects the
// hardware concurrency. Exceptions are rethrown for the lowest failing index.
void parallel_for_indices(std::uint64_t n, int workers,
                          const std::function<void(std::uint64_t)>& body);

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t value);

struct EnsembleSummary {
  std::uint64_t m_trajectories = 0;
  std::vector<std::uint64_t> outcome_counts;  // per basis group
  std::uint64_t unresolved_count = 0;
  std::vector<double> checkpoint_times;
  std::vector<std::vector<double>> checkpoint_means;    // [checkpoint][k]
  std::vector<std::vector<double>> checkpoint_stddevs;  // sample standard deviation
  double wall_time_seconds = 0.0;  // excluded from serialization and fingerprint
  std::string fingerprint;         // hash of spec + config + m + master_seed
  std::uint64_t master_seed = 0;
};

// m independent trajectories with indices 0..m-1. Checkpoint times are
// snapped to the step grid; trajectories that terminate early carry their
// final populations forward to later checkpoints.
EnsembleSummary run_ensemble(const ModelSpec& spec, const StateVector& psi0,
                             const IntegratorConfig& config, std::uint64_t m,
                             std::uint64_t master_seed,
                             const std::vector<double>& checkpoint_times = {}, int workers = 0);

struct BornCheck {
  std::vector<double> observed;  // outcome fractions
  std::vector<double> expected;  // |psi0_k|^2
  std::vector<double> margin;    // 3 sqrt(p(1-p)/m)
  bool pass = false;
};

// Requires unresolved_count/m < 1%.
BornCheck born_check(const EnsembleSummary& summary, const StateVector& psi0);

struct MartingaleCheck {
  std::vector<double> checkpoint_times;
  std::vector<std::vector<double>> mean;  // [checkpoint][k]
  std::vector<std::vector<double>> band;  // 3 * stddev / sqrt(m)
  std::vector<double> expected;           // |psi0_k|^2
  bool pass = false;
};

MartingaleCheck martingale_check(const EnsembleSummary& summary, const StateVector& psi0);

struct KSResult {
  double statistic = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double alpha = 0.05;
  double critical_value = 0.0;
  bool pass = false;
};

// Two-sample Kolmogorov-Smirnov statistic with the asymptotic critical value
// c(alpha) sqrt((n_a + n_b)/(n_a n_b)), c(alpha) = sqrt(-ln(alpha/2)/2).
KSResult ks_statistic(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double alpha = 0.05;
  double critical_value = 0.0;
  bool pass = false;
};

// Upper regularized incomplete gamma Q(s, x) and the chi-square critical
// value solving Q(dof/2, x/2) = alpha.
double regularized_gamma_q(double s, double x);
double chi_square_critical(int dof, double alpha);

ChiSquareResult chi_square_vs_expected(std::span<const double> observed_counts,
                                       std::span<const double> expected_counts,
                                       double alpha = 0.05);

// Histogram of samples over [lo, hi] against a uniform expectation.
ChiSquareResult chi_square_uniform(std::span<const double> samples, double lo, double hi, int bins,
                                   double alpha = 0.05);

// Biased-normalization empirical autocovariance at lags 0, dt, ..., max_lag.
// Requires the path to be much longer than the lag window.
std::vector<std::pair<double, double>> autocorrelation_estimate(std::span<const double> path,
                                                                double dt, double max_lag);

// Samples of <P_k> at a fixed time, one per trajectory, integrating through
// collapse (stop_on_collapse forced off).
std::vector<double> ensemble_population_samples(const ModelSpec& spec, const StateVector& psi0,
                                                const IntegratorConfig& config, int k,
                                                double t_target, std::uint64_t m,
                                                std::uint64_t master_seed, int workers = 0);

struct ProjectorMoments {
  Matrix mean;               // ensemble mean of |psi><psi|
  Eigen::MatrixXd stderr_real;
  Eigen::MatrixXd stderr_imag;
  double time = 0.0;
  std::uint64_t m = 0;
};

ProjectorMoments ensemble_mean_projector(const ModelSpec& spec, const StateVector& psi0,
                                         const IntegratorConfig& config, double t_target,
                                         std::uint64_t m, std::uint64_t master_seed,
                                         int workers = 0);

struct HomogenizationResult {
  std::vector<double> tau_list;
  std::vector<double> noise_couplings;  // G per tau at fixed diffusion
  double diffusion = 0.0;
  int repetitions = 1;
  std::vector<KSResult> ks;     // first repetition, per tau
  std::vector<double> mean_ks;  // per tau, averaged over repetitions
  bool strictly_decreasing = false;  // on mean_ks
  bool smallest_tau_pass = false;    // first repetition's smallest-tau KS at 5%
};

// Runs the colored model across a descending tau list at fixed effective
// diffusion (noise_coupling rescaled per tau) and compares the law of <P_0>
// at t = config.t_max against the matching white-noise projector model
// (reference ensemble of 10 m trajectories, seeded independently).
//
// Within a repetition all tau values share one seed (common random numbers),
// so the per-tau KS differences isolate the systematic tau dependence;
// repetitions use independent seeds and their per-tau mean KS carries the
// monotonicity verdict. The significance verdict stays on the first
// repetition's unaveraged smallest-tau comparison. A template diffusion of 0
// selects hbar*coupling/system_size, which makes the tau -> 0 limit coincide
// with the reference law.
HomogenizationResult homogenization_sweep(const ModelSpec& colored_template,
                                          const StateVector& psi0,
                                          const std::vector<double>& tau_list,
                                          const IntegratorConfig& config, std::uint64_t m,
                                          std::uint64_t master_seed, int workers = 0,
                                          int repetitions = 1);

// Canonical text form of (spec, config, m, seed) feeding the fingerprint.
std::string canonical_run_description(const ModelSpec& spec, const IntegratorConfig& config,
                                      std::uint64_t m, std::uint64_t master_seed);

}  // namespace qsr
