#include "qsr/hilbert.hpp"

#include <algorithm>
#include <cmath>

namespace qsr {

StateVector::StateVector(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() < 2) {
    throw Error(ErrorCode::invalid_state,
                "StateVector requires dimension >= 2, got " + std::to_string(amplitudes_.size()));
  }
  if (!amplitudes_.allFinite()) {
    throw Error(ErrorCode::invalid_state, "StateVector amplitudes must be finite");
  }
  const double n2 = amplitudes_.squaredNorm();
  if (std::abs(n2 - 1.0) > tol::norm) {
    throw Error(ErrorCode::invalid_state,
                "StateVector norm^2 deviates from 1 by " + std::to_string(n2 - 1.0) +
                    " (tolerance " + std::to_string(tol::norm) + "); normalize first");
  }
}

Vector normalize_vector(const Vector& v) {
  if (!v.allFinite()) {
    throw Error(ErrorCode::invalid_state, "cannot normalize a non-finite vector");
  }
  const double n = v.norm();
  if (n == 0.0) {
    throw Error(ErrorCode::invalid_state, "cannot normalize the zero vector");
  }
  if (std::abs(n - 1.0) < 1e-15) {
    return v;  // bit-identical on already-normalized input
  }
  return v / n;
}

StateVector normalize(const Vector& v) { return StateVector(normalize_vector(v)); }

HermitianOperator::HermitianOperator(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "operator matrix must be square");
  }
  const double dev = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
  if (!(dev <= tol::hermiticity)) {
    throw Error(ErrorCode::invalid_state,
                "operator deviates from Hermitian by " + std::to_string(dev));
  }
}

double expectation(const Matrix& op, const Vector& psi) {
  if (op.rows() != psi.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "expectation: operator dim " + std::to_string(op.rows()) +
                    " does not match state dim " + std::to_string(psi.size()));
  }
  const Complex value = psi.dot(op * psi);  // Eigen's dot conjugates the left argument
  if (std::abs(value.imag()) > tol::expectation_imag) {
    throw Error(ErrorCode::numerical_failure,
                "expectation has imaginary residue " + std::to_string(value.imag()));
  }
  return value.real();
}

double expectation(const HermitianOperator& op, const StateVector& psi) {
  return expectation(op.mat(), psi.vec());
}

HermitianOperator order_parameter(double system_size) {
  if (!(system_size > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "order parameter requires system_size > 0");
  }
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = system_size;
  m(1, 1) = -system_size;
  return HermitianOperator(std::move(m));
}

ProjectorSet ProjectorSet::canonical(int n_dim) {
  if (n_dim < 2) {
    throw Error(ErrorCode::invalid_argument,
                "canonical projector set requires dimension >= 2, got " + std::to_string(n_dim));
  }
  std::vector<std::vector<int>> groups(n_dim);
  for (int k = 0; k < n_dim; ++k) groups[k] = {k};
  return from_index_groups(n_dim, std::move(groups));
}

ProjectorSet ProjectorSet::from_index_groups(int dim, std::vector<std::vector<int>> groups) {
  if (dim < 2) {
    throw Error(ErrorCode::invalid_argument, "projector set requires dimension >= 2");
  }
  // Disjointness and completeness: the groups must partition {0, ..., dim-1}.
  std::vector<int> owner(dim, -1);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) {
      throw Error(ErrorCode::invalid_argument, "projector group " + std::to_string(k) + " is empty");
    }
    for (int i : groups[k]) {
      if (i < 0 || i >= dim) {
        throw Error(ErrorCode::invalid_argument,
                    "projector index " + std::to_string(i) + " out of range for dim " +
                        std::to_string(dim));
      }
      if (owner[i] != -1) {
        throw Error(ErrorCode::invalid_argument,
                    "projectors not orthogonal: basis index " + std::to_string(i) +
                        " appears in groups " + std::to_string(owner[i]) + " and " +
                        std::to_string(k));
      }
      owner[i] = static_cast<int>(k);
    }
  }
  for (int i = 0; i < dim; ++i) {
    if (owner[i] == -1) {
      throw Error(ErrorCode::invalid_argument,
                  "projector set incomplete: basis index " + std::to_string(i) + " uncovered");
    }
  }
  ProjectorSet set;
  set.dim_ = dim;
  set.groups_ = std::move(groups);
  for (auto& g : set.groups_) std::sort(g.begin(), g.end());
  return set;
}

double ProjectorSet::population(int k, const Vector& psi) const {
  double p = 0.0;
  for (int i : groups_[k]) p += std::norm(psi(i));
  return p;
}

void ProjectorSet::populations(const Vector& psi, std::vector<double>& out) const {
  out.resize(groups_.size());
  for (std::size_t k = 0; k < groups_.size(); ++k) {
    out[k] = population(static_cast<int>(k), psi);
  }
}

Vector ProjectorSet::apply(int k, const Vector& psi) const {
  Vector out = Vector::Zero(dim_);
  for (int i : groups_[k]) out(i) = psi(i);
  return out;
}

Matrix ProjectorSet::matrix(int k) const {
  Matrix m = Matrix::Zero(dim_, dim_);
  for (int i : groups_[k]) m(i, i) = 1.0;
  return m;
}

Matrix ProjectorSet::pinch(const Matrix& rho) const {
  if (rho.rows() != dim_ || rho.cols() != dim_) {
    throw Error(ErrorCode::dimension_mismatch, "pinch: matrix dim does not match projector set");
  }
  // Keeps entries within each index group, zeroes the rest. Entries are
  // copied exactly, with no arithmetic.
  Matrix out = Matrix::Zero(dim_, dim_);
  for (const auto& g : groups_) {
    for (int i : g) {
      for (int j : g) out(i, j) = rho(i, j);
    }
  }
  return out;
}

DensityMatrix::DensityMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "density matrix must be square");
  }
  if (!entries_.allFinite()) {
    throw Error(ErrorCode::invalid_state, "density matrix entries must be finite");
  }
  const double herm = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
  if (!(herm <= tol::hermiticity)) {
    throw Error(ErrorCode::invalid_state,
                "density matrix deviates from Hermitian by " + std::to_string(herm));
  }
  const double tr_dev = std::abs(entries_.trace().real() - 1.0) + std::abs(entries_.trace().imag());
  if (!(tr_dev <= tol::trace)) {
    throw Error(ErrorCode::invalid_state,
                "density matrix trace deviates from 1 by " + std::to_string(tr_dev));
  }
  const double min_ev = Eigen::SelfAdjointEigenSolver<Matrix>(entries_, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
  if (!(min_ev >= -tol::positivity)) {
    throw Error(ErrorCode::invalid_state,
                "density matrix has negative eigenvalue " + std::to_string(min_ev));
  }
}

double DensityMatrix::purity() const { return entries_.squaredNorm(); }

double DensityMatrix::min_eigenvalue() const {
  return Eigen::SelfAdjointEigenSolver<Matrix>(entries_, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

DensityMatrix pure_projector(const StateVector& psi) {
  return DensityMatrix(psi.vec() * psi.vec().adjoint());
}

}  // namespace qsr
