#include "qsr/master.hpp"

#include <cmath>

namespace qsr {

void MasterConfig::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_state, "master dt must be > 0");
  if (!(t_max > 0.0)) throw Error(ErrorCode::invalid_state, "master t_max must be > 0");
  if (record_stride < 1) throw Error(ErrorCode::invalid_state, "record_stride must be >= 1");
}

Matrix gksl_rhs(const ModelSpec& spec, const Matrix& rho) {
  if (rho.rows() != spec.dim() || rho.cols() != spec.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "gksl_rhs: density matrix dim mismatch");
  }
  Matrix out = spec.coupling * spec.system_size * (spec.projectors.pinch(rho) - rho);
  if (spec.hamiltonian) {
    const Matrix& h = spec.hamiltonian->mat();
    out += Complex(0.0, -1.0) * (h * rho - rho * h);
  }
  return out / spec.hbar;
}

MasterSeries integrate_master(const ModelSpec& spec, const DensityMatrix& rho0,
                              const MasterConfig& config) {
  spec.validate();
  config.validate();
  if (rho0.dim() != spec.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "integrate_master: rho0 dim mismatch");
  }

  const double dt = config.dt;
  auto total_steps = static_cast<std::uint64_t>(std::llround(config.t_max / dt));
  if (total_steps == 0) total_steps = 1;

  MasterSeries series;
  auto record = [&](std::uint64_t step, const Matrix& rho) {
    try {
      series.states.emplace_back(rho);
    } catch (const Error& e) {
      throw Error(ErrorCode::numerical_failure,
                  "master snapshot invalid at step " + std::to_string(step) + ": " + e.what());
    }
    series.times.push_back(static_cast<double>(step) * dt);
  };

  Matrix rho = rho0.mat();
  record(0, rho);
  for (std::uint64_t step = 1; step <= total_steps; ++step) {
    const Matrix k1 = gksl_rhs(spec, rho);
    const Matrix k2 = gksl_rhs(spec, rho + (0.5 * dt) * k1);
    const Matrix k3 = gksl_rhs(spec, rho + (0.5 * dt) * k2);
    const Matrix k4 = gksl_rhs(spec, rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (step % static_cast<std::uint64_t>(config.record_stride) == 0 || step == total_steps) {
      record(step, rho);
    }
  }
  return series;
}

EnsembleMasterComparison compare_ensemble_to_master(const Matrix& ensemble_mean,
                                                    const Eigen::MatrixXd& stderr_real,
                                                    const Eigen::MatrixXd& stderr_imag,
                                                    const DensityMatrix& master_rho) {
  const auto n = master_rho.dim();
  if (ensemble_mean.rows() != n || ensemble_mean.cols() != n || stderr_real.rows() != n ||
      stderr_imag.rows() != n || stderr_real.cols() != n || stderr_imag.cols() != n) {
    throw Error(ErrorCode::dimension_mismatch,
                "compare_ensemble_to_master: mismatched configuration (matrix dims differ)");
  }
  EnsembleMasterComparison out;
  out.within_band = true;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Complex diff = ensemble_mean(i, j) - master_rho.mat()(i, j);
      const double dev_re = std::abs(diff.real());
      const double dev_im = std::abs(diff.imag());
      out.max_deviation = std::max({out.max_deviation, dev_re, dev_im});
      // A vanishing standard error demands exact agreement up to roundoff.
      const double band_re = 3.0 * stderr_real(i, j) + 1e-12;
      const double band_im = 3.0 * stderr_imag(i, j) + 1e-12;
      out.max_sigma_ratio = std::max({out.max_sigma_ratio, dev_re / band_re, dev_im / band_im});
      if (dev_re > band_re || dev_im > band_im) out.within_band = false;
    }
  }
  return out;
}

}  // namespace qsr
