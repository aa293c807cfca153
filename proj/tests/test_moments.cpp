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

LieGroupRep u1_z() {
  CMatrix charge = CMatrix::Zero(2, 2);
  charge(0, 0) = cplx(0.0, -1.0);
  return make_lie_group(LieKind::U1, {charge});
}

FiniteGroupRep physical_z4() {
  const CMatrix gen = y_rotation(kPi / 2);
  return quotient_global_phase(generate_group(std::span<const CMatrix>(&gen, 1)));
}

}  // namespace

TEST_CASE("product states have zero Renyi entropy") {
  for (int n : {2, 3, 4}) {
    CHECK(std::abs(renyi_entropy(ferromagnet(), n, std::nullopt)) < 1e-14);
    CHECK(std::abs(renyi_entropy(tilted_product(0.7), n, 5)) < 1e-14);
  }
}

TEST_CASE("GHZ(0.3) Renyi-2: the pipeline refuses, the oracle gives -log 0.58") {
  CHECK(kind_of([] { renyi_entropy(ghz(0.3), 2, 10); }) == ErrorKind::NonClustering);
  const DensityMatrix rho = ring_reduced_density_matrix(ghz(0.3), 20, 10);
  CHECK(std::abs(-std::log(exact_renyi_moment(rho, 2)) + std::log(0.58)) < 1e-12);
}

TEST_CASE("random D=3 tensor on a ring of 9 sites matches the oracle") {
  const MpsTensor t = random_mps(2, 3, 77);
  const DensityMatrix rho = ring_reduced_density_matrix(t, 9, 3);
  const MomentEvaluator ev(t, VolumeMode::finite(9));
  for (int n : {2, 3}) CHECK(std::abs(ev.renyi_moment(n, 3) - exact_renyi_moment(rho, n)) < 1e-8);
}

TEST_CASE("infinite volume agrees with a 30-site ring when the gap is large") {
  int seed = 1;
  while (clustering_check(random_mps(2, 3, seed)).gap_ratio > 0.4) ++seed;
  const MpsTensor t = random_mps(2, 3, seed);
  const DensityMatrix rho = ring_reduced_density_matrix(t, 30, 3);
  for (int n : {2, 3}) {
    const double s = renyi_entropy(t, n, 3);
    const double exact = std::log(exact_renyi_moment(rho, n)) / (1.0 - n);
    CHECK(std::abs(s - exact) < 1e-6);
  }
}

TEST_CASE("ferromagnet charged moments") {
  const CMatrix u = y_rotation(kPi / 2);
  const std::vector<CMatrix> quarter{u, u.adjoint()};
  CHECK(std::abs(charged_moment(ferromagnet(), quarter, 3).value - cplx(0.125)) < 1e-14);
  const CMatrix v = y_rotation(kPi);
  const std::vector<CMatrix> half{v, v.adjoint()};
  CHECK(std::abs(charged_moment(ferromagnet(), half, 3).value) < 1e-14);
}

TEST_CASE("identity insertions give the Renyi moment") {
  const MpsTensor t = random_mps(2, 2, 8);
  const MomentEvaluator ev(t);
  for (int n : {2, 3}) {
    const std::vector<CMatrix> ids(static_cast<std::size_t>(n), CMatrix::Identity(2, 2));
    CHECK(std::abs(ev.charged_moment(ids, 4).value - cplx(ev.renyi_moment(n, 4))) < 1e-12);
  }
}

TEST_CASE("random D=2 charged moment matches a 24-site ring") {
  const MpsTensor t = random_mps(2, 2, 31);
  const CMatrix u = random_unitary(2, 4);
  const std::vector<CMatrix> us{kron(u, u), kron(u, u).adjoint()};
  const DensityMatrix rho = ring_reduced_density_matrix(t, 24, 2);
  const cplx exact = exact_charged_moment(rho, us);
  CHECK(std::abs(charged_moment(t, std::vector<CMatrix>{u, u.adjoint()}, 2, VolumeMode::finite(24)).value - exact) <
        1e-6);
}

TEST_CASE("charged moments require the product to be the identity") {
  const std::vector<CMatrix> us{y_rotation(0.3), y_rotation(0.3)};
  CHECK(kind_of([&] { charged_moment(ferromagnet(), us, 2); }) == ErrorKind::ProductNotIdentity);
}

TEST_CASE("finite group asymmetry examples") {
  const FiniteGroupRep z4 = physical_z4();
  const std::vector<int> grid{1, 200};
  const AsymmetryReport r = asymmetry_finite_group(ferromagnet(), z4, 2, grid);
  CHECK(std::abs(r.delta_s[0] - std::log(2.0)) < 1e-12);
  CHECK(std::abs(r.delta_s[1] - std::log(4.0)) < 1e-12);
  CHECK_FALSE(r.mc_std_err.has_value());

  // AKLT is invariant under the spin-1 pi rotations about x and z
  const auto spin = spin_matrices(1.0);
  const std::vector<CMatrix> gens{expm_antihermitian(cplx(0.0, -kPi) * spin[0]),
                                  expm_antihermitian(cplx(0.0, -kPi) * spin[2])};
  const FiniteGroupRep z2z2 = generate_group(gens);
  CHECK(z2z2.order() == 4);
  for (int n : {2, 3}) {
    const std::vector<int> ells{1, 4, 9};
    for (double v : asymmetry_finite_group(aklt(), z2z2, n, ells).delta_s) CHECK(std::abs(v) < 1e-10);
  }
}

TEST_CASE("finite group sums respect the term cap") {
  const CMatrix gen = y_rotation(kPi / 2);
  const FiniteGroupRep g8 = generate_group(std::span<const CMatrix>(&gen, 1));
  AsymmetryOptions options;
  options.term_cap = 10;
  const std::vector<int> grid{2};
  CHECK(kind_of([&] { asymmetry_finite_group(ferromagnet(), g8, 3, grid, options); }) == ErrorKind::TermCapExceeded);
}

TEST_CASE("U(1) asymmetry of a symmetric state vanishes") {
  const std::vector<int> grid{1, 8, 64};
  for (double v : asymmetry_lie_group(ferromagnet(), u1_z(), 2, grid).delta_s) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("U(1) asymmetry of the tilted state at small ell") {
  // product state: Delta S_2 = -log int dalpha/2pi cos^{2 ell}(alpha/2) = -log(C(2 ell, ell) / 4^ell)
  const std::vector<int> grid{1, 2, 5, 10};
  const AsymmetryReport r = asymmetry_lie_group(tilted_product(kPi / 2), u1_z(), 2, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int ell = grid[i];
    double central = 1.0;
    for (int k = 1; k <= ell; ++k) central *= (ell + k) / (4.0 * k);
    CHECK(std::abs(r.delta_s[i] + std::log(central)) < 1e-10);
  }
}

TEST_CASE("Monte Carlo standard error above the threshold is an error") {
  LieGroupRep su2 = make_lie_group(LieKind::SU2, su2_generators(0.5));
  su2.quadrature.scheme = QuadratureScheme::MonteCarlo;
  su2.quadrature.samples = 200;
  su2.quadrature.seed = 3;
  AsymmetryOptions options;
  options.mc_max_rel_err = 1e-6;
  const std::vector<int> grid{16};
  CHECK(kind_of([&] { asymmetry_lie_group(ferromagnet(), su2, 2, grid, options); }) == ErrorKind::MCVarianceTooLarge);
}

TEST_CASE("free energy density examples") {
  const std::vector<CMatrix> ids(2, CMatrix::Identity(2, 2));
  CHECK(std::abs(free_energy_density(random_mps(2, 2, 4), ids)) < 1e-12);
  const CMatrix u = y_rotation(kPi / 2);
  const std::vector<CMatrix> pair{u, u.adjoint()};
  CHECK(std::abs(free_energy_density(ferromagnet(), pair) - cplx(std::log(2.0))) < 1e-12);
  // -1 is in H for the ferromagnet: phases cancel between g and g^{-1}
  const CMatrix minus = -CMatrix::Identity(2, 2);
  const std::vector<CMatrix> sym{minus, minus};
  CHECK(std::abs(free_energy_density(ferromagnet(), sym)) < 1e-12);
}

TEST_CASE("Hessian examples") {
  const CMatrix id = CMatrix::Identity(2, 2);
  const std::span<const CMatrix> h_point(&id, 1);
  const HessianResult symmetric = hessian_at_subgroup(ferromagnet(), u1_z(), h_point, 2);
  CHECK(symmetric.hessian.size() == 0);

  const MpsTensor tilted = tilted_product(kPi / 2);
  const HessianResult h = hessian_at_subgroup(tilted, u1_z(), h_point, 2);
  REQUIRE(h.hessian.rows() == 1);
  CHECK(h.positive_definite);
  // second difference of -(1/ell) log f at ell = 512, from charged moments
  const int ell = 512;
  const double step = 1e-2;
  const LieGroupRep g = u1_z();
  auto minus_log_f = [&](double alpha) {
    const double a[] = {alpha};
    const CMatrix u = g.element(a);
    const std::vector<CMatrix> us{u, u.adjoint()};
    return -std::log(std::abs(charged_moment(tilted, us, ell).value)) / ell;
  };
  const double second = (minus_log_f(step) - 2.0 * minus_log_f(0.0) + minus_log_f(-step)) / (step * step);
  CHECK(std::abs(h.hessian(0, 0) - second) < 0.01 * second);
  CHECK(std::abs(h.hessian(0, 0) - 0.5) < 1e-4);

  const LieGroupRep su2 = make_lie_group(LieKind::SU2, su2_generators(0.5));
  const HessianResult s = hessian_at_subgroup(ferromagnet(), su2, h_point, 2);
  REQUIRE(s.hessian.rows() == 2);
  CHECK(s.positive_definite);
  CHECK(s.gradient.norm() < 1e-6);
}

TEST_CASE("subleading correction of a random D=3 tensor") {
  std::vector<int> grid;
  for (int ell = 4; ell <= 30; ++ell) grid.push_back(ell);
  const MpsTensor t = random_mps(2, 3, 1);
  const FitResult fit = subleading_correction_fit(t, 2, grid);
  const double lambda2 = std::abs(testkit::dense_eigenvalues(build_transfer_operator(t).matrix())[1]);
  CHECK(std::abs(*fit.reference_rate - lambda2) < 1e-10);
  CHECK(std::abs(fit.rate - lambda2) < 0.02 * lambda2);
}

TEST_CASE("AKLT subleading correction decays at the squared rate") {
  // the first-order term vanishes, so the correction is governed by |lambda_2|^2 = 1/9
  std::vector<int> grid;
  for (int ell = 2; ell <= 14; ++ell) grid.push_back(ell);
  const FitResult fit = subleading_correction_fit(aklt(), 2, grid);
  CHECK(std::abs(*fit.reference_rate - 1.0 / 3.0) < 1e-10);
  CHECK(*fit.first_order_weight < 1e-10);
  CHECK(std::abs(fit.rate - 1.0 / 9.0) < 0.02 / 9.0);
}

TEST_CASE("product state has no correction to fit") {
  const std::vector<int> grid{1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(kind_of([&] { subleading_correction_fit(ferromagnet(), 2, grid); }) == ErrorKind::FitIllConditioned);
}

TEST_CASE("fit helpers") {
  const std::vector<double> few{1, 2, 3, 4, 5};
  CHECK(kind_of([&] { fit_log_slope(few, few); }) == ErrorKind::FitIllConditioned);

  std::vector<double> ell, flat, exp_values, log_values;
  for (int k = 1; k <= 40; ++k) {
    ell.push_back(k);
    flat.push_back(2.5);
    exp_values.push_back(1.3 - 0.7 * std::pow(0.6, k));
    log_values.push_back(0.5 * std::log(k) + 0.2);
  }
  const FitResult constant = fit_log_slope(ell, flat);
  CHECK(std::abs(constant.slope) < 1e-12);
  CHECK(std::abs(constant.constant - 2.5) < 1e-12);

  const FitResult e = fit_exponential_to_constant(ell, exp_values);
  CHECK(std::abs(e.constant - 1.3) < 1e-8);
  CHECK(std::abs(e.amplitude - 0.7) < 1e-6);
  CHECK(std::abs(e.rate - 0.6) < 1e-7);

  const FitResult l = fit_log_slope(ell, log_values);
  CHECK(std::abs(l.slope - 0.5) < 1e-12);
  CHECK(l.points == 20);
}

TEST_CASE("permutation targets are cyclic") {
  const Permutation p{3};
  CHECK(p.target(0) == 1);
  CHECK(p.target(2) == 0);
  const CMatrix dense = p.dense_matrix(2);
  CHECK(dense.rows() == 64);
  CHECK(max_abs_diff(dense * dense.adjoint(), CMatrix::Identity(64, 64)) < 1e-14);
}
