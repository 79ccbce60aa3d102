#pragma once

#include <vector>

#include "qsr/models.hpp"

namespace qsr {

struct MasterConfig {
  double dt = 1e-4;
  double t_max = 1.0;
  int record_stride = 1;

  void validate() const;
};

// Right-hand side of the dephasing master equation:
//   ( -i [H, rho] + coupling*system_size * (sum_k P_k rho P_k - rho) ) / hbar.
Matrix gksl_rhs(const ModelSpec& spec, const Matrix& rho);

struct MasterSeries {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
};

// Classical RK4 time series. Every recorded snapshot is re-validated against
// the DensityMatrix invariants; a violation names the failing step.
MasterSeries integrate_master(const ModelSpec& spec, const DensityMatrix& rho0,
                              const MasterConfig& config);

struct EnsembleMasterComparison {
  double max_deviation = 0.0;   // max entrywise |mean - rho| over real and imaginary parts
  double max_sigma_ratio = 0.0; // worst deviation / (3 * standard error)
  bool within_band = false;     // every entry within 3x its Monte Carlo standard error
};

// Compares the ensemble mean of pure-state projectors against the master
// solution at matched time. stderr matrices hold the per-entry Monte Carlo
// standard errors of the real and imaginary parts.
EnsembleMasterComparison compare_ensemble_to_master(const Matrix& ensemble_mean,
                                                    const Eigen::MatrixXd& stderr_real,
                                                    const Eigen::MatrixXd& stderr_imag,
                                                    const DensityMatrix& master_rho);

}  // namespace qsr
