#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numbers>

#include "asymkit/error.hpp"
#include "asymkit/io.hpp"
#include "asymkit/moments.hpp"
#include "asymkit/oracle.hpp"
#include "asymkit/states.hpp"
#include "asymkit/symmetry.hpp"
#include "support.hpp"

using namespace asymkit;

namespace {

constexpr double kPi = std::numbers::pi;

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Config;
}

DensityMatrix random_rho(int dim, std::uint64_t seed) {
  const CMatrix a = testkit::random_matrix(dim, dim, seed);
  CMatrix m = a * a.adjoint();
  m /= m.trace().real();
  return DensityMatrix{m};
}

// permutation of qubit positions: output qubit k carries input qubit perm[k]
CMatrix qubit_permutation(const std::vector<int>& perm) {
  const int n = static_cast<int>(perm.size());
  const int dim = 1 << n;
  CMatrix p = CMatrix::Zero(dim, dim);
  for (int in = 0; in < dim; ++in) {
    int out = 0;
    for (int k = 0; k < n; ++k) {
      const int bit = (in >> (n - 1 - perm[static_cast<std::size_t>(k)])) & 1;
      out |= bit << (n - 1 - k);
    }
    p(out, in) = 1.0;
  }
  return p;
}

LieGroupRep u1_z(int sites) {
  CMatrix charge = CMatrix::Zero(2, 2);
  charge(0, 0) = cplx(0.0, -1.0);
  return tensor_power(make_lie_group(LieKind::U1, {charge}), sites);
}

}  // namespace

TEST_CASE("dense_state examples") {
  const DenseState f = dense_state(ferromagnet(), 3);
  CHECK(f.amplitudes.size() == 8);
  CHECK(std::abs(f.amplitudes[0] - cplx(1.0)) < 1e-15);
  CHECK(f.amplitudes.tail(7).norm() < 1e-15);

  const DenseState g = dense_state(ghz(0.3), 4);
  CHECK(std::abs(g.amplitudes[0] - cplx(std::sqrt(0.3))) < 1e-14);
  CHECK(std::abs(g.amplitudes[15] - cplx(std::sqrt(0.7))) < 1e-14);
  CHECK(g.amplitudes.segment(1, 14).norm() < 1e-14);

  const MpsTensor t = random_mps(2, 2, 6);
  const CVector reference = testkit::amplitudes_by_products(t, 8);
  CHECK(std::abs(std::abs(reference.dot(dense_state(t, 8).amplitudes)) - 1.0) < 1e-12);
}

TEST_CASE("dense_state respects the cap") {
  CHECK(kind_of([] { dense_state(ferromagnet(), 30, std::size_t{1} << 20); }) == ErrorKind::CapExceeded);
}

TEST_CASE("reduced_density_matrix examples") {
  const DensityMatrix product = reduced_density_matrix(dense_state(tilted_product(0.9), 6), 2);
  CHECK(std::abs((product.matrix * product.matrix).trace() - cplx(1.0)) < 1e-12);

  const DensityMatrix g = reduced_density_matrix(dense_state(ghz(0.5), 6), 2);
  CMatrix expected = CMatrix::Zero(4, 4);
  expected(0, 0) = 0.5;
  expected(3, 3) = 0.5;
  CHECK(max_abs_diff(g.matrix, expected) < 1e-14);

  const DensityMatrix r = reduced_density_matrix(dense_state(random_mps(2, 3, 2), 10), 4);
  CHECK(std::abs(r.matrix.trace() - cplx(1.0)) < 1e-12);
  validate_density_matrix(r);
}

TEST_CASE("ring reduced density matrix agrees with the dense state on a ring") {
  const MpsTensor t = random_mps(2, 2, 15);
  const DensityMatrix dense = reduced_density_matrix(dense_state(t, 10), 3);
  const DensityMatrix ring = ring_reduced_density_matrix(t, 10, 3);
  CHECK(max_abs_diff(dense.matrix, ring.matrix) < 1e-12);
}

TEST_CASE("validate_density_matrix rejects broken inputs") {
  CMatrix m = CMatrix::Identity(2, 2) * 0.5;
  m(0, 1) = 0.3;
  CHECK(kind_of([&] { validate_density_matrix(DensityMatrix{m}); }) == ErrorKind::StructureViolation);
  CMatrix neg = CMatrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  CHECK(kind_of([&] { validate_density_matrix(DensityMatrix{neg}); }) == ErrorKind::StructureViolation);
}

TEST_CASE("symmetrize_exact examples") {
  const CMatrix x = kron_power(pauli_x(), 3);
  const FiniteGroupRep flip = generate_group(std::span<const CMatrix>(&x, 1));

  const DensityMatrix sym{CMatrix::Identity(8, 8) / 8.0};
  CHECK(max_abs_diff(symmetrize_exact(sym, flip.elements).matrix, sym.matrix) < 1e-12);

  const DensityMatrix g = reduced_density_matrix(dense_state(ghz(0.3), 6), 3);
  const DensityMatrix tilde = symmetrize_exact(g, flip.elements);
  CHECK(std::abs(tilde.matrix(0, 0) - cplx(0.5)) < 1e-14);
  CHECK(std::abs(tilde.matrix(7, 7) - cplx(0.5)) < 1e-14);

  const CMatrix gen = kron(y_rotation(kPi / 2), y_rotation(kPi / 2));
  const FiniteGroupRep z4 = generate_group(std::span<const CMatrix>(&gen, 1));
  const DensityMatrix r = random_rho(4, 3);
  const DensityMatrix once = symmetrize_exact(r, z4.elements);
  CHECK(max_abs_diff(symmetrize_exact(once, z4.elements).matrix, once.matrix) < 1e-12);
}

TEST_CASE("exact_asymmetry examples") {
  const CMatrix x = kron_power(pauli_x(), 2);
  const FiniteGroupRep flip = generate_group(std::span<const CMatrix>(&x, 1));
  const DensityMatrix g = reduced_density_matrix(dense_state(ghz(0.3), 6), 2);
  CHECK(std::abs(exact_asymmetry(g, symmetrize_exact(g, flip.elements), 2) - std::log(2.0 * 0.58)) < 1e-12);
  const DensityMatrix sym{CMatrix::Identity(4, 4) / 4.0};
  CHECK(std::abs(exact_asymmetry(sym, symmetrize_exact(sym, flip.elements), 2)) < 1e-14);
}

TEST_CASE("exact asymmetry matches the pipeline on the same ring") {
  const MpsTensor t = random_mps(2, 2, 40);
  const CMatrix gen = kron(y_rotation(kPi / 2), y_rotation(kPi / 2));
  const FiniteGroupRep z4 = generate_group(std::span<const CMatrix>(&gen, 1));
  const CMatrix site_gen = y_rotation(kPi / 2);
  const FiniteGroupRep g8 = generate_group(std::span<const CMatrix>(&site_gen, 1));
  const int ell = 2, length = 20;
  const DensityMatrix rho = ring_reduced_density_matrix(t, length, ell);
  const DensityMatrix tilde = symmetrize_exact(rho, z4.elements);
  // pipeline sum over the order-8 single-site group in finite volume
  const MomentEvaluator ev(t, VolumeMode::finite(length));
  cplx sum = 0.0;
  for (std::size_t i = 0; i < g8.order(); ++i) {
    const std::vector<CMatrix> us{g8.elements[i], g8.elements[g8.inverse[i]]};
    sum += ev.charged_moment(us, ell).value;
  }
  const double pipeline = -std::log(sum.real() / g8.order() / ev.renyi_moment(2, ell));
  CHECK(std::abs(pipeline - exact_asymmetry(rho, tilde, 2)) < 1e-6);
}

TEST_CASE("abelian block path equals the group average") {
  const CMatrix x = kron_power(pauli_x(), 2);
  const FiniteGroupRep flip = generate_group(std::span<const CMatrix>(&x, 1));
  const DensityMatrix g = reduced_density_matrix(dense_state(ghz(0.3), 6), 2);
  const auto proj = abelian_irrep_projectors(flip, flip.elements);
  CHECK(max_abs_diff(symmetrize_abelian_blocks(g, proj).matrix, symmetrize_exact(g, flip.elements).matrix) < 1e-12);

  CMatrix diag = CMatrix::Zero(2, 2);
  diag(0, 0) = 1.0;
  diag(1, 1) = cplx(0.0, 1.0);
  const CMatrix gen = kron(diag, diag);
  const FiniteGroupRep z4 = generate_group(std::span<const CMatrix>(&gen, 1));
  const auto z4_proj = abelian_irrep_projectors(z4, z4.elements);
  const DensityMatrix r = random_rho(4, 8);
  CHECK(max_abs_diff(symmetrize_abelian_blocks(r, z4_proj).matrix, symmetrize_exact(r, z4.elements).matrix) < 1e-12);
  CMatrix d = CMatrix::Zero(4, 4);
  d.diagonal() << 0.1, 0.2, 0.3, 0.4;
  CHECK(max_abs_diff(symmetrize_abelian_blocks(DensityMatrix{d}, z4_proj).matrix, d) < 1e-14);
}

TEST_CASE("non-abelian basis path: two spins under SU(2)") {
  const LieGroupRep su2 = tensor_power(make_lie_group(LieKind::SU2, su2_generators(0.5)), 2);
  const IsotypicDecomposition dec = isotypic_decomposition(su2);
  CMatrix up_up = CMatrix::Zero(4, 4);
  up_up(0, 0) = 1.0;
  const DensityMatrix rho{up_up};
  const DensityMatrix tilde = symmetrize_nonabelian_basis(rho, dec);
  // triplet projector over 3
  CMatrix singlet = CMatrix::Zero(4, 1);
  singlet(1, 0) = 1.0 / std::sqrt(2.0);
  singlet(2, 0) = -1.0 / std::sqrt(2.0);
  const CMatrix triplet = CMatrix::Identity(4, 4) - singlet * singlet.adjoint();
  CHECK(max_abs_diff(tilde.matrix, triplet / 3.0) < 1e-10);
  const BlockStructureReport report = block_structure_check(tilde, dec, &rho);
  CHECK(report.max_cross_block < 1e-10);
  CHECK(report.max_trace_mismatch < 1e-10);
}

TEST_CASE("non-abelian basis path: S3 on three qubits") {
  const std::vector<CMatrix> gens{qubit_permutation({1, 0, 2}), qubit_permutation({1, 2, 0})};
  const FiniteGroupRep s3 = generate_group(gens);
  REQUIRE(s3.order() == 6);
  const IsotypicDecomposition dec = isotypic_decomposition(s3.elements);
  const DensityMatrix r = random_rho(8, 21);
  const DensityMatrix tilde = symmetrize_nonabelian_basis(r, dec);
  CHECK(max_abs_diff(tilde.matrix, symmetrize_exact(r, s3.elements).matrix) < 1e-10);
  block_structure_check(tilde, dec, &r);
}

TEST_CASE("abelian decomposition reduces to the block projection") {
  CMatrix diag = CMatrix::Zero(2, 2);
  diag(0, 0) = 1.0;
  diag(1, 1) = cplx(0.0, 1.0);
  const CMatrix gen = kron(diag, diag);
  const FiniteGroupRep z4 = generate_group(std::span<const CMatrix>(&gen, 1));
  const IsotypicDecomposition dec = isotypic_decomposition(z4.elements);
  for (const auto& c : dec.components) CHECK(c.irrep_dim == 1);
  const DensityMatrix r = random_rho(4, 5);
  CHECK(max_abs_diff(symmetrize_nonabelian_basis(r, dec).matrix,
                     symmetrize_abelian_blocks(r, abelian_irrep_projectors(z4, z4.elements)).matrix) < 1e-10);
}

TEST_CASE("block_structure_check controls") {
  const LieGroupRep su2 = tensor_power(make_lie_group(LieKind::SU2, su2_generators(0.5)), 2);
  const IsotypicDecomposition dec = isotypic_decomposition(su2);
  const DensityMatrix id{CMatrix::Identity(4, 4) / 4.0};
  block_structure_check(id, dec, &id);
  CMatrix corrupted = CMatrix::Identity(4, 4) / 4.0;
  corrupted(0, 1) = corrupted(1, 0) = 0.05;
  CHECK(kind_of([&] { block_structure_check(DensityMatrix{corrupted}, dec); }) == ErrorKind::StructureViolation);
}

TEST_CASE("Haar Monte Carlo: U(1) dephasing of a tilted product") {
  const DensityMatrix rho = reduced_density_matrix(dense_state(tilted_product(kPi / 2), 4), 2);
  const HaarSymmetrization mc = symmetrize_haar_mc(rho, u1_z(2), 100000, 9);
  // charge of basis state = number of up spins
  const int charge[] = {2, 1, 1, 0};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double diff = std::abs(mc.rho.matrix(i, j) - (charge[i] == charge[j] ? rho.matrix(i, j) : cplx(0.0)));
      CHECK(diff <= 3.0 * mc.std_err(i, j) + 1e-12);
    }
  }
  const DensityMatrix symmetric{CMatrix(Eigen::Vector4cd(0.1, 0.2, 0.3, 0.4).asDiagonal())};
  CHECK(max_abs_diff(symmetrize_haar_mc(symmetric, u1_z(2), 1000, 1).rho.matrix, symmetric.matrix) < 1e-12);
}

TEST_CASE("Haar Monte Carlo: SU(2) output nearly commutes with the generators") {
  const LieGroupRep su2 = tensor_power(make_lie_group(LieKind::SU2, su2_generators(0.5)), 2);
  const DensityMatrix r = random_rho(4, 13);
  const HaarSymmetrization mc = symmetrize_haar_mc(r, su2, 100000, 4);
  const DensityMatrix exact = symmetrize_nonabelian_basis(r, isotypic_decomposition(su2));
  double z2 = 0.0;
  int counted = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double diff = std::abs(mc.rho.matrix(i, j) - exact.matrix(i, j));
      if (mc.std_err(i, j) > 1e-12) {
        z2 += std::pow(diff / mc.std_err(i, j), 2);
        ++counted;
      }
    }
  }
  CHECK(std::sqrt(z2 / counted) < 3.0);
  CHECK(mc.commutant_defect < 0.05);
}

TEST_CASE("exact charged moment with identities is the Renyi moment") {
  const DensityMatrix r = random_rho(4, 17);
  const std::vector<CMatrix> ids(3, CMatrix::Identity(4, 4));
  CHECK(std::abs(exact_charged_moment(r, ids) - cplx(exact_renyi_moment(r, 3))) < 1e-14);
}

TEST_CASE("density matrix JSON round trip") {
  const DensityMatrix r = random_rho(3, 23);
  const Json j = density_matrix_to_json(r);
  const DensityMatrix back = density_matrix_from_json(Json::parse(j.dump()));
  CHECK(max_abs_diff(back.matrix, r.matrix) == 0.0);
}
