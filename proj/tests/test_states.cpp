#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numbers>

#include "asymkit/error.hpp"
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

FiniteGroupRep spin_flip(int sites = 1) {
  const CMatrix x = kron_power(pauli_x(), sites);
  return generate_group(std::span<const CMatrix>(&x, 1));
}

}  // namespace

TEST_CASE("catalog tensors have the documented shapes") {
  CHECK(ferromagnet().bond_dim() == 1);
  CHECK(ferromagnet(true)[1](0, 0) == cplx(1.0));
  CHECK(tilted_product(0.4).phys_dim() == 2);
  CHECK(neel().phys_dim() == 4);
  CHECK(neel().bond_dim() == 1);
  CHECK(ghz(0.3).bond_dim() == 2);
  CHECK(aklt().phys_dim() == 3);
  CHECK(aklt().bond_dim() == 2);
  const MpsTensor r = random_mps(3, 4, 9);
  CHECK(r.phys_dim() == 3);
  CHECK(r.bond_dim() == 4);
  CHECK(max_abs_diff(r[2], random_mps(3, 4, 9)[2]) == 0.0);

  CatalogParams params;
  params.theta = 1.1;
  CHECK(max_abs_diff(catalog(CatalogState::TiltedProduct, params)[1], tilted_product(1.1)[1]) == 0.0);
}

TEST_CASE("catalog parameter errors") {
  CHECK(kind_of([] { ghz(1.5); }) == ErrorKind::BadParam);
  CHECK(kind_of([] { ghz(-0.1); }) == ErrorKind::BadParam);
  CHECK(kind_of([] { random_mps(0, 2, 1); }) == ErrorKind::BadParam);
  CHECK(kind_of([] { random_mps(2, 0, 1); }) == ErrorKind::BadParam);
}

TEST_CASE("GHZ(1) is clustering with spin-flip asymmetry log 2") {
  const MpsTensor t = ghz(1.0);
  CHECK(clustering_check(t).is_clustering);
  const std::vector<int> grid{1, 10};
  for (int n : {2, 3}) {
    for (double v : asymmetry_finite_group(t, spin_flip(), n, grid).delta_s) CHECK(std::abs(v - std::log(2.0)) < 1e-12);
  }
}

TEST_CASE("GHZ(1/2) is refused and the oracle gives zero asymmetry") {
  const MpsTensor t = ghz(0.5);
  CHECK_FALSE(clustering_check(t).is_clustering);
  const std::vector<int> grid{3};
  CHECK(kind_of([&] { asymmetry_finite_group(t, spin_flip(), 2, grid); }) == ErrorKind::NonClustering);
  const DensityMatrix rho = reduced_density_matrix(dense_state(t, 8), 3);
  const DensityMatrix tilde = symmetrize_exact(rho, spin_flip(3).elements);
  for (int n : {2, 3}) CHECK(std::abs(exact_asymmetry(rho, tilde, n)) < 1e-12);
}

TEST_CASE("blocked Neel charged moment is 2^{-2 ell}") {
  const CMatrix u = kron(y_rotation(kPi / 2), y_rotation(kPi / 2));
  const std::vector<CMatrix> us{u, u.adjoint()};
  for (int ell : {1, 2, 5}) {
    CHECK(std::abs(charged_moment(neel(), us, ell).value - cplx(std::pow(2.0, -2 * ell))) < 1e-14);
  }
}

TEST_CASE("AKLT Renyi-2 limit matches the ring oracle") {
  const double pipeline = renyi_entropy(aklt(), 2, std::nullopt);
  double purity = 0.0;
  for (double p : ring_reduced_spectrum(aklt(), 24, 8)) purity += p * p;
  CHECK(std::abs(pipeline + std::log(purity)) < 1e-4);
  // four degenerate Schmidt values 1/4 for a long interval
  CHECK(std::abs(pipeline - std::log(4.0)) < 1e-10);
}

TEST_CASE("low-rank ring spectrum agrees with the dense reduced density matrix") {
  const MpsTensor t = random_mps(2, 3, 12);
  const DensityMatrix rho = ring_reduced_density_matrix(t, 12, 4);
  const std::vector<double> spectrum = ring_reduced_spectrum(t, 12, 4);
  CHECK(spectrum.size() == 9);
  for (int n : {2, 3}) {
    double moment = 0.0;
    for (double p : spectrum) moment += std::pow(p, n);
    CHECK(std::abs(moment - exact_renyi_moment(rho, n)) < 1e-12);
  }
}

TEST_CASE("XXZ ground state at delta = 4 matches the exact-diagonalization extrapolation") {
  const double e12 = testkit::xxz_ring_energy(12, 4.0);
  const double e14 = testkit::xxz_ring_energy(14, 4.0);
  const double e16 = testkit::xxz_ring_energy(16, 4.0);
  const double d1 = e14 - e12, d2 = e16 - e14;
  const double extrapolated = e16 - d2 * d2 / (d2 - d1);

  XxzSpec spec;
  spec.delta = 4.0;
  spec.bond_dim = 16;
  const XxzResult r = xxz_ground_state(spec, PhaseHint::Antiferro);
  CHECK(std::abs(r.energy_density - extrapolated) < 1e-4);
  CHECK(std::abs(xxz_energy_density(r.tensor, 4.0) - r.energy_density) < 1e-8);
  const auto c = clustering_check(r.tensor);
  CHECK(c.is_clustering);
  CHECK(c.gap_ratio < 0.99);
  CHECK(std::abs(spectral_radius(build_transfer_operator(r.tensor)) - 1.0) < 1e-10);
  CHECK_FALSE(r.log.empty());
}

TEST_CASE("XXZ ferromagnetic side returns the product state") {
  XxzSpec spec;
  spec.delta = -2.0;
  const XxzResult r = xxz_ground_state(spec, PhaseHint::Ferro);
  CHECK(std::abs(r.energy_density + 2.0) < 1e-10);
  CHECK(r.tensor.bond_dim() == 1);
  CHECK(std::abs(renyi_entropy(r.tensor, 2, std::nullopt)) < 1e-12);
}

TEST_CASE("XXZ errors") {
  XxzSpec critical;
  critical.delta = 0.5;
  CHECK(kind_of([&] { xxz_ground_state(critical, PhaseHint::Antiferro); }) == ErrorKind::CriticalRegime);
  XxzSpec short_run;
  short_run.delta = 3.0;
  short_run.bond_dim = 4;
  short_run.schedule = {{0.1, 3}};
  short_run.energy_tol = 1e-14;
  CHECK(kind_of([&] { xxz_ground_state(short_run, PhaseHint::Antiferro); }) == ErrorKind::NonConvergence);
  XxzSpec increasing;
  increasing.schedule = {{0.01, 10}, {0.1, 10}};
  CHECK(kind_of([&] { xxz_ground_state(increasing, PhaseHint::Antiferro); }) == ErrorKind::BadParam);
}

TEST_CASE("XXZ bond Hamiltonian") {
  const CMatrix h = xxz_bond_hamiltonian(2.0);
  CHECK(h(0, 0) == cplx(2.0));
  CHECK(h(1, 1) == cplx(-2.0));
  CHECK(h(1, 2) == cplx(2.0));
  CHECK(max_abs_diff(h, h.adjoint()) == 0.0);
  // the Neel product has energy -delta per site
  CHECK(std::abs(xxz_energy_density(neel(), 2.0) + 2.0) < 1e-12);
}
