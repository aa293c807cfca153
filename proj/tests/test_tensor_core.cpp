#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "asymkit/error.hpp"
#include "asymkit/linalg.hpp"
#include "support.hpp"

using namespace asymkit;

TEST_CASE("eig_leading on the identity") {
  const auto pairs = eig_leading(CMatrix::Identity(3, 3), 1);
  REQUIRE(pairs.size() == 1);
  CHECK(std::abs(pairs[0].value - cplx(1.0)) < 1e-14);
}

TEST_CASE("eig_leading on a diagonal matrix sorts by modulus") {
  CMatrix m = CMatrix::Zero(3, 3);
  m.diagonal() << 0.5, -0.9, 0.2;
  const auto pairs = eig_leading(m, 2);
  CHECK(std::abs(pairs[0].value - cplx(-0.9)) < 1e-14);
  CHECK(std::abs(pairs[1].value - cplx(0.5)) < 1e-14);
}

TEST_CASE("eig_leading matches the dense spectrum of a random matrix") {
  const CMatrix m = testkit::random_matrix(16, 16, 3);
  const CVector reference = testkit::dense_eigenvalues(m);
  const auto pairs = eig_leading(m, 3);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(pairs[static_cast<std::size_t>(k)].value - reference[k]) < 1e-8);
}

TEST_CASE("eig_leading residual and biorthogonality on 100 seeded matrices") {
  int checked = 0;
  for (int dim : {4, 16, 64}) {
    for (int seed = 0; seed < 34 && checked < 100; ++seed, ++checked) {
      const CMatrix m = testkit::random_matrix(dim, dim, 1000 + 100 * dim + seed);
      const auto pairs = eig_leading(m, 2);
      for (const auto& p : pairs) {
        CHECK((m * p.right - p.value * p.right).norm() <= 1e-10 * m.norm());
        CHECK(std::abs((p.left.transpose() * p.right)(0, 0) - cplx(1.0)) < 1e-10);
      }
    }
  }
  CHECK(checked == 100);
}

TEST_CASE("power iteration path agrees with the dense path") {
  // a dominant, well separated eigenvalue so the iteration converges quickly
  CMatrix m = 0.1 * testkit::random_matrix(12, 12, 5);
  m(0, 0) += 5.0;
  EigOptions iterative;
  iterative.dense_threshold = 0;
  const auto fast = eig_leading(m, 1, 1e-12, iterative);
  const auto dense = eig_leading(m, 1);
  CHECK(std::abs(fast[0].value - dense[0].value) < 1e-9);
  CHECK((m * fast[0].right - fast[0].value * fast[0].right).norm() <= 1e-10 * m.norm());
}

TEST_CASE("stagnating power iteration falls back to the dense solver") {
  // equal-modulus pair: power iteration cannot settle
  CMatrix m = CMatrix::Zero(6, 6);
  m.diagonal() << 1.0, -1.0, 0.3, 0.2, 0.1, 0.05;
  EigOptions iterative;
  iterative.dense_threshold = 0;
  iterative.max_iterations = 50;
  const auto pairs = eig_leading(m, 2, 1e-12, iterative);
  CHECK(std::abs(std::abs(pairs[0].value) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(pairs[1].value) - 1.0) < 1e-12);
}

TEST_CASE("eig_leading rejects bad requests") {
  CHECK_THROWS_AS(eig_leading(CMatrix::Identity(2, 3), 1), Error);
  CHECK_THROWS_AS(eig_leading(CMatrix::Identity(2, 2), 3), Error);
  CMatrix bad = CMatrix::Identity(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    eig_leading(bad, 1);
    FAIL("NaN input accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
}

TEST_CASE("matrix_power examples") {
  const CMatrix m = testkit::random_matrix(5, 5, 9);
  CHECK(max_abs_diff(matrix_power(m, 0), CMatrix::Identity(5, 5)) == 0.0);
  CMatrix d = CMatrix::Zero(2, 2);
  d.diagonal() << 0.5, 2.0;
  const CMatrix p = matrix_power(d, 3);
  CHECK(std::abs(p(0, 0) - cplx(0.125)) < 1e-15);
  CHECK(std::abs(p(1, 1) - cplx(8.0)) < 1e-15);
  const CMatrix r = testkit::random_matrix(8, 8, 21) / 3.0;
  const CMatrix naive = testkit::naive_power(r, 13);
  CHECK((matrix_power(r, 13) - naive).norm() <= 1e-12 * naive.norm());
}

TEST_CASE("matrix_power is additive in the exponent") {
  for (int seed = 0; seed < 20; ++seed) {
    const CMatrix m = testkit::random_matrix(6, 6, 300 + seed) / 4.0;
    const unsigned long long k1 = seed % 7, k2 = (3 * seed) % 11;
    const CMatrix lhs = matrix_power(m, k1 + k2);
    const CMatrix rhs = matrix_power(m, k1) * matrix_power(m, k2);
    CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, lhs.norm()));
  }
}

TEST_CASE("kron puts the first factor on the slow index") {
  CMatrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 0, 1, 1, 0;
  const CMatrix k = kron(a, b);
  CHECK(k(0, 1) == cplx(1.0));
  CHECK(k(2, 1) == cplx(3.0));
  CHECK(k(3, 2) == cplx(4.0));
  CHECK(kron_power(b, 3).rows() == 8);
}

TEST_CASE("expm_antihermitian is unitary and matches the rotation") {
  CMatrix x = CMatrix::Zero(2, 2);
  x(0, 1) = -0.5;
  x(1, 0) = 0.5;  // -i sigma_y / 2
  const CMatrix u = expm_antihermitian(1.2 * x);
  CHECK(is_unitary(u, 1e-14));
  CHECK(std::abs(u(0, 0) - cplx(std::cos(0.6))) < 1e-14);
  CHECK(std::abs(u(1, 0) - cplx(std::sin(0.6))) < 1e-14);
}

TEST_CASE("random_unitary is unitary and seeded") {
  const CMatrix u = random_unitary(4, 17);
  CHECK(is_unitary(u, 1e-12));
  CHECK(max_abs_diff(u, random_unitary(4, 17)) == 0.0);
  CHECK(max_abs_diff(u, random_unitary(4, 18)) > 1e-3);
}

TEST_CASE("pairwise_sum is exact on small integers and order-stable") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  CHECK(pairwise_sum(v) == 499500.0);
  std::vector<cplx> c{cplx(1, 2), cplx(3, -1), cplx(-4, 0)};
  CHECK(pairwise_sum(c) == cplx(0, 1));
}

TEST_CASE("null_space spans the kernel") {
  CMatrix a = CMatrix::Zero(2, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0;
  const CMatrix k = null_space(a);
  REQUIRE(k.cols() == 1);
  CHECK(std::abs(std::abs(k(2, 0)) - 1.0) < 1e-14);
}
