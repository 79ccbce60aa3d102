#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qsr/hilbert.hpp"

using namespace qsr;

namespace {

Vector random_state(std::mt19937_64& gen, int dim) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(normal(gen), normal(gen));
  return v / v.norm();
}

Matrix sigma_z() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

}  // namespace

TEST_CASE("expectation on eigenstates and superpositions") {
  Matrix p0 = Matrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  Vector up(2);
  up << 1.0, 0.0;
  CHECK(expectation(p0, up) == doctest::Approx(1.0).epsilon(1e-14));

  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  CHECK(expectation(sigma_z(), plus) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("expectation is independent of relative and global phase") {
  for (int i = 0; i < 100; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / 100.0;
    Vector psi(2);
    psi << std::sqrt(0.3), std::polar(std::sqrt(0.7), theta);
    CHECK(std::abs(expectation(sigma_z(), psi) - (-0.4)) < 1e-12);

    // Global phase on top.
    Vector rotated = std::polar(1.0, 0.7 * theta) * psi;
    CHECK(std::abs(expectation(sigma_z(), rotated) - (-0.4)) < 1e-12);
  }
}

TEST_CASE("expectation rejects dimension mismatch") {
  Vector psi(3);
  psi << 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(expectation(sigma_z(), psi), Error);
}

TEST_CASE("order parameter is the scaled Pauli matrix") {
  const HermitianOperator s1 = order_parameter(1.0);
  CHECK(s1.mat()(0, 0) == Complex(1.0, 0.0));
  CHECK(s1.mat()(1, 1) == Complex(-1.0, 0.0));
  CHECK(s1.mat()(0, 1) == Complex(0.0, 0.0));

  const HermitianOperator s100 = order_parameter(100.0);
  CHECK(s100.mat()(0, 0).real() == doctest::Approx(100.0));
  CHECK(s100.mat()(1, 1).real() == doctest::Approx(-100.0));

  // N (P_0 - P_1) with the canonical two-projector set.
  const ProjectorSet p = ProjectorSet::canonical(2);
  const Matrix rebuilt = 100.0 * (p.matrix(0) - p.matrix(1));
  CHECK((s100.mat() - rebuilt).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  CHECK_THROWS_AS(order_parameter(0.0), Error);
  CHECK_THROWS_AS(order_parameter(-2.0), Error);
}

TEST_CASE("canonical projector sets satisfy the defining algebra") {
  const ProjectorSet p2 = ProjectorSet::canonical(2);
  CHECK(p2.matrix(0)(0, 0) == Complex(1.0, 0.0));
  CHECK(p2.matrix(0)(1, 1) == Complex(0.0, 0.0));
  CHECK(p2.matrix(1)(1, 1) == Complex(1.0, 0.0));

  const ProjectorSet p5 = ProjectorSet::canonical(5);
  Matrix sum = Matrix::Zero(5, 5);
  for (int k = 0; k < p5.size(); ++k) {
    const Matrix pk = p5.matrix(k);
    sum += pk;
    CHECK((pk * pk - pk).cwiseAbs().maxCoeff() < 1e-12);  // idempotence
  }
  CHECK((sum - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);  // completeness
  CHECK((p5.matrix(1) * p5.matrix(3)).cwiseAbs().maxCoeff() < 1e-12);   // orthogonality

  CHECK_THROWS_AS(ProjectorSet::canonical(1), Error);
}

TEST_CASE("index-group construction rejects overlaps and gaps") {
  CHECK_THROWS_AS(ProjectorSet::from_index_groups(4, {{0, 1}, {1, 2, 3}}), Error);
  CHECK_THROWS_AS(ProjectorSet::from_index_groups(4, {{0, 1}, {2}}), Error);
  CHECK_THROWS_AS(ProjectorSet::from_index_groups(4, {{0, 1}, {2, 5}}), Error);

  const ProjectorSet blocks = ProjectorSet::from_index_groups(4, {{0, 2}, {1, 3}});
  CHECK(blocks.size() == 2);
  Vector psi(4);
  psi << 0.5, 0.5, 0.5, 0.5;
  CHECK(blocks.population(0, psi) == doctest::Approx(0.5));
}

TEST_CASE("masked apply matches the dense projector product") {
  std::mt19937_64 gen(7);
  const ProjectorSet p = ProjectorSet::canonical(6);
  const Vector psi = random_state(gen, 6);
  for (int k = 0; k < p.size(); ++k) {
    const Vector masked = p.apply(k, psi);
    const Vector dense = p.matrix(k) * psi;
    CHECK((masked - dense).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(p.population(k, psi) == doctest::Approx(expectation(p.matrix(k), psi)).epsilon(1e-13));
  }
}

TEST_CASE("normalize scales direction-preserving and is idempotent bit-for-bit") {
  Vector a(2);
  a << 2.0, 0.0;
  const StateVector na = normalize(a);
  CHECK(na[0] == Complex(1.0, 0.0));
  CHECK(na[1] == Complex(0.0, 0.0));

  Vector b(2);
  b << 1.0, 1.0;
  const StateVector nb = normalize(b);
  CHECK(nb[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(nb[1].real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  const Vector again = normalize_vector(nb.vec());
  CHECK(again(0) == nb[0]);  // bit-identical when already normalized
  CHECK(again(1) == nb[1]);

  Vector zero = Vector::Zero(2);
  CHECK_THROWS_AS(normalize(zero), Error);
}

TEST_CASE("state vector construction enforces the invariants") {
  Vector bad(2);
  bad << 0.5, 0.5;
  CHECK_THROWS_AS(StateVector{bad}, Error);

  Vector one(1);
  one << 1.0;
  CHECK_THROWS_AS(StateVector{one}, Error);
}

TEST_CASE("pure projector is rank-1, trace-1, Hermitian") {
  Vector up(2);
  up << 1.0, 0.0;
  const DensityMatrix d0 = pure_projector(StateVector(up));
  CHECK(d0.mat()(0, 0).real() == doctest::Approx(1.0));
  CHECK(d0.mat()(1, 1).real() == doctest::Approx(0.0));

  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const DensityMatrix dp = pure_projector(StateVector(plus));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(dp.mat()(i, j).real() == doctest::Approx(0.5).epsilon(1e-14));
    }
  }

  std::mt19937_64 gen(11);
  const DensityMatrix d8 = pure_projector(StateVector(random_state(gen, 8)));
  CHECK(d8.mat().trace().real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d8.purity() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("density matrix construction enforces the invariants") {
  Matrix not_hermitian(2, 2);
  not_hermitian << 0.5, Complex(0.1, 0.2), Complex(0.1, 0.3), 0.5;
  CHECK_THROWS_AS(DensityMatrix{not_hermitian}, Error);

  Matrix bad_trace = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(DensityMatrix{bad_trace}, Error);

  Matrix negative(2, 2);
  negative << 1.1, 0.0, 0.0, -0.1;
  CHECK_THROWS_AS(DensityMatrix{negative}, Error);
}

TEST_CASE("completeness: expectation of the projector sum is 1") {
  std::mt19937_64 gen(23);
  for (int dim : {2, 3, 5, 8}) {
    const ProjectorSet p = ProjectorSet::canonical(dim);
    const Vector psi = random_state(gen, dim);
    double total = 0.0;
    for (int k = 0; k < p.size(); ++k) total += p.population(k, psi);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}
