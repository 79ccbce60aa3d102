#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "qsr/errors.hpp"

namespace qsr {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

// Construction-time tolerances, fixed here and nowhere else.
namespace tol {
inline constexpr double norm = 1e-10;              // |sum |psi_i|^2 - 1|
inline constexpr double hermiticity = 1e-12;       // entrywise |A - A^dag|
inline constexpr double trace = 1e-10;             // |Tr rho - 1|
inline constexpr double positivity = 1e-10;        // eigenvalues of rho >= -positivity
inline constexpr double expectation_imag = 1e-10;  // residual Im <psi|A|psi>
inline constexpr double fdr_relative = 1e-12;      // relative FDR mismatch
}  // namespace tol

// Normalized complex amplitude vector over an N-dimensional Hilbert space,
// N >= 2. Immutable after construction; safe to share across threads.
class StateVector {
public:
  explicit StateVector(Vector amplitudes);

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const Vector& vec() const { return amplitudes_; }
  Complex operator[](int i) const { return amplitudes_(i); }

private:
  Vector amplitudes_;
};

// Scales v to unit norm. Inputs already within 1e-15 of unit norm are
// returned unchanged, bit for bit. Zero or non-finite input is an error.
Vector normalize_vector(const Vector& v);
StateVector normalize(const Vector& v);

class HermitianOperator {
public:
  explicit HermitianOperator(Matrix entries);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& mat() const { return entries_; }

private:
  Matrix entries_;
};

// <psi|op|psi>. The imaginary residue must be below tol::expectation_imag;
// it is asserted and discarded.
double expectation(const HermitianOperator& op, const StateVector& psi);
double expectation(const Matrix& op, const Vector& psi);

// The two-state order parameter: system_size * diag(1, -1). Scales
// extensively so that collapse dominates for macroscopic sizes.
HermitianOperator order_parameter(double system_size);

// Complete set of mutually orthogonal projectors, stored as index groups over
// the canonical basis. Idempotence and orthogonality hold by construction;
// completeness is enforced at construction. Model inner loops use the index
// shortcut (P_k psi is a masked copy) instead of dense products.
class ProjectorSet {
public:
  ProjectorSet() = default;  // empty; invalid until assigned

  // n_dim rank-1 projectors |k><k|. n_dim < 2 is an error.
  static ProjectorSet canonical(int n_dim);

  // General partition of {0, ..., dim-1} into index groups.
  static ProjectorSet from_index_groups(int dim, std::vector<std::vector<int>> groups);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(groups_.size()); }
  const std::vector<int>& indices(int k) const { return groups_[k]; }

  double population(int k, const Vector& psi) const;           // <psi|P_k|psi>
  void populations(const Vector& psi, std::vector<double>& out) const;
  Vector apply(int k, const Vector& psi) const;                // P_k psi
  Matrix matrix(int k) const;                                  // dense realization
  Matrix pinch(const Matrix& rho) const;                       // sum_k P_k rho P_k

private:
  int dim_ = 0;
  std::vector<std::vector<int>> groups_;
};

// N x N density matrix: Hermitian within tol::hermiticity, unit trace within
// tol::trace, eigenvalues >= -tol::positivity.
class DensityMatrix {
public:
  explicit DensityMatrix(Matrix entries);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& mat() const { return entries_; }
  double purity() const;  // Tr[rho^2]
  double min_eigenvalue() const;

private:
  Matrix entries_;
};

// |psi><psi| as a validated density matrix.
DensityMatrix pure_projector(const StateVector& psi);

}  // namespace qsr
