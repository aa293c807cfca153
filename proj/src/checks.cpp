#include "asymkit/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "asymkit/error.hpp"
#include "asymkit/moments.hpp"
#include "asymkit/oracle.hpp"
#include "asymkit/states.hpp"
#include "asymkit/symmetry.hpp"

namespace asymkit {

bool CheckSummary::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const CheckCase& c) { return c.passed; });
}

double CheckSummary::max_error() const {
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, c.error);
  return worst;
}

int CheckSummary::failures() const {
  return static_cast<int>(std::count_if(cases.begin(), cases.end(), [](const CheckCase& c) { return !c.passed; }));
}

CheckSummary moment_oracle_suite(const MomentSuiteOptions& options) {
  CheckSummary out;
  for (int i = 0; i < options.cases; ++i) {
    const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(i);
    const int bond = 2 + i % 2;
    const int ell = 1 + i % 3;
    CheckCase c;
    std::ostringstream name;
    name << "random d=2 D=" << bond << " seed=" << seed << " ell=" << ell;
    c.name = name.str();
    c.tolerance = options.tol;
    try {
      const MpsTensor t = random_mps(2, bond, seed);
      const MomentEvaluator ev(t, VolumeMode::finite(options.length));
      const DensityMatrix rho = ring_reduced_density_matrix(t, options.length, ell);
      for (int n : {2, 3}) {
        std::vector<CMatrix> us;
        CMatrix product = CMatrix::Identity(2, 2);
        for (int j = 0; j + 1 < n; ++j) {
          us.push_back(random_unitary(2, seed * 1000 + static_cast<std::uint64_t>(10 * n + j)));
          product = product * us.back();
        }
        us.push_back(product.adjoint());
        std::vector<CMatrix> blocks;
        for (const auto& u : us) blocks.push_back(kron_power(u, ell));
        const cplx pipeline = ev.charged_moment(us, ell).value;
        const cplx exact = exact_charged_moment(rho, blocks);
        c.error = std::max(c.error, std::abs(pipeline - exact));
        const double s_pipeline = std::log(ev.renyi_moment(n, ell)) / (1.0 - n);
        const double s_exact = std::log(exact_renyi_moment(rho, n)) / (1.0 - n);
        c.error = std::max(c.error, std::abs(s_pipeline - s_exact));
      }
      c.passed = c.error <= c.tolerance;
    } catch (const Error& e) {
      c.note = e.what();
    }
    out.cases.push_back(std::move(c));
  }
  return out;
}

namespace {

DensityMatrix wishart(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  CMatrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = cplx(normal(rng), normal(rng));
  }
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix{rho};
}

CMatrix swap_sites(int a, int b) {
  CMatrix p = CMatrix::Zero(8, 8);
  for (int x = 0; x < 8; ++x) {
    int bits[3] = {(x >> 2) & 1, (x >> 1) & 1, x & 1};
    std::swap(bits[a], bits[b]);
    p(bits[0] * 4 + bits[1] * 2 + bits[2], x) = 1.0;
  }
  return p;
}

// Collects every symmetrization path of one case and applies the shared checks.
class CaseRecorder {
 public:
  CaseRecorder(const DensityMatrix& rho, double tol) : rho_(rho), tol_(tol) {}

  void path(const std::string& label, const DensityMatrix& rho_tilde) { paths_.emplace_back(label, rho_tilde); }
  void commutant(std::span<const CMatrix> mats) { commutant_.insert(commutant_.end(), mats.begin(), mats.end()); }
  void decomposition(const IsotypicDecomposition& dec) { dec_ = &dec; }
  void deviation(const std::string& what, double value) {
    error_ = std::max(error_, value);
    if (value > tol_) fail(what);
  }
  void fail(const std::string& what) { notes_ << (notes_.tellp() > 0 ? "; " : "") << what; failed_ = true; }

  // Haar Monte Carlo versus an exact path: rms z-score over fluctuating entries must stay
  // below 3, entries without fluctuation must agree exactly.
  void monte_carlo(const HaarSymmetrization& mc, const DensityMatrix& reference) {
    double z2 = 0.0;
    int count = 0;
    double still = 0.0;
    for (Eigen::Index i = 0; i < reference.dim(); ++i) {
      for (Eigen::Index j = 0; j < reference.dim(); ++j) {
        const double diff = std::abs(mc.rho.matrix(i, j) - reference.matrix(i, j));
        const double sigma = mc.std_err(i, j);
        if (sigma > 1e-12) {
          z2 += (diff / sigma) * (diff / sigma);
          ++count;
        } else {
          still = std::max(still, diff);
        }
      }
    }
    const double z_rms = count > 0 ? std::sqrt(z2 / count) : 0.0;
    mc_z_ = std::max(mc_z_, z_rms);
    if (z_rms > 3.0) fail("Haar Monte Carlo differs by more than 3 sigma");
    if (still > 1e-9) fail("Haar Monte Carlo moves an invariant entry");
  }

  CheckCase finish(std::string name) {
    const double purity = (rho_.matrix * rho_.matrix).trace().real();
    for (std::size_t a = 0; a < paths_.size(); ++a) {
      const auto& [label, rt] = paths_[a];
      try {
        validate_density_matrix(rt);
      } catch (const Error& e) {
        fail(label + ": " + e.what());
      }
      for (const auto& m : commutant_) deviation(label + " does not commute", (m * rt.matrix - rt.matrix * m).cwiseAbs().maxCoeff());
      const double sym_purity = (rt.matrix * rt.matrix).trace().real();
      if (sym_purity > purity + 1e-12) fail(label + " increases the purity");
      if (dec_ != nullptr) {
        try {
          const auto report = block_structure_check(rt, *dec_, &rho_, tol_);
          error_ = std::max({error_, report.max_cross_block, report.max_identity_deviation, report.max_trace_mismatch});
        } catch (const Error& e) {
          fail(label + ": " + e.what());
        }
      }
      for (std::size_t b = 0; b < a; ++b) {
        deviation(label + " vs " + paths_[b].first, max_abs_diff(rt.matrix, paths_[b].second.matrix));
      }
    }
    CheckCase c;
    c.name = std::move(name);
    c.error = error_;
    c.tolerance = tol_;
    c.passed = !failed_;
    std::ostringstream note;
    note << notes_.str();
    if (mc_z_ > 0.0) note << (note.tellp() > 0 ? "; " : "") << "mc rms z " << mc_z_;
    c.note = note.str();
    return c;
  }

 private:
  DensityMatrix rho_;
  double tol_;
  std::vector<std::pair<std::string, DensityMatrix>> paths_;
  std::vector<CMatrix> commutant_;
  const IsotypicDecomposition* dec_ = nullptr;
  double error_ = 0.0;
  double mc_z_ = 0.0;
  bool failed_ = false;
  std::ostringstream notes_;
};

CheckCase su2_two_site(int index, std::uint64_t seed, const SymmetrizationSuiteOptions& options) {
  std::mt19937_64 rng(seed);
  const LieGroupRep g = tensor_power(make_lie_group(LieKind::SU2, su2_generators(0.5)), 2);
  const bool up_up = index == 0;
  DensityMatrix rho = up_up ? DensityMatrix{CMatrix::Zero(4, 4)} : wishart(4, rng);
  if (up_up) rho.matrix(0, 0) = 1.0;
  const IsotypicDecomposition dec = isotypic_decomposition(g, seed);
  CaseRecorder rec(rho, options.tol);
  const DensityMatrix basis = symmetrize_nonabelian_basis(rho, dec);
  rec.path("invariant basis", basis);
  rec.commutant(g.generators);
  rec.decomposition(dec);
  if (up_up) {
    CVector singlet = CVector::Zero(4);
    singlet[1] = 1.0 / std::numbers::sqrt2;
    singlet[2] = -1.0 / std::numbers::sqrt2;
    const CMatrix triplet = CMatrix::Identity(4, 4) - singlet * singlet.adjoint();
    rec.deviation("triplet / 3", max_abs_diff(basis.matrix, triplet / 3.0));
  }
  rec.monte_carlo(symmetrize_haar_mc(rho, g, options.mc_samples, seed), basis);
  return rec.finish(up_up ? "SU(2) two sites, |up up>" : "SU(2) two sites, random rho");
}

CheckCase s3_three_qubits(std::uint64_t seed, const SymmetrizationSuiteOptions& options) {
  std::mt19937_64 rng(seed);
  const std::vector<CMatrix> gens{swap_sites(0, 1), swap_sites(1, 2)};
  const FiniteGroupRep g = generate_group(gens);
  const DensityMatrix rho = wishart(8, rng);
  const IsotypicDecomposition dec = isotypic_decomposition(g.elements, seed);
  CaseRecorder rec(rho, options.tol);
  rec.path("group average", symmetrize_exact(rho, g.elements));
  rec.path("invariant basis", symmetrize_nonabelian_basis(rho, dec));
  rec.commutant(g.elements);
  rec.decomposition(dec);
  if (g.order() != 6) rec.fail("S3 closure did not give six elements");
  return rec.finish("S3 permutations, three qubits");
}

CheckCase ghz_spin_flip(int index, std::uint64_t seed, const SymmetrizationSuiteOptions& options) {
  std::mt19937_64 rng(seed);
  const double p = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
  const int ell = 2 + index % 3;
  const DensityMatrix rho = reduced_density_matrix(dense_state(ghz(p), 8), ell);
  const std::vector<CMatrix> gens{kron_power(pauli_x(), ell)};
  const FiniteGroupRep g = generate_group(gens);
  const IsotypicDecomposition dec = isotypic_decomposition(g.elements, seed);
  CaseRecorder rec(rho, options.tol);
  const DensityMatrix exact = symmetrize_exact(rho, g.elements);
  rec.path("group average", exact);
  rec.path("abelian sectors", symmetrize_abelian_blocks(rho, abelian_irrep_projectors(g, g.elements)));
  rec.path("invariant basis", symmetrize_nonabelian_basis(rho, dec));
  rec.commutant(g.elements);
  rec.decomposition(dec);
  const double expected = std::log(2.0) + std::log(p * p + (1 - p) * (1 - p));
  rec.deviation("GHZ asymmetry", std::abs(exact_asymmetry(rho, exact, 2) - expected));
  std::ostringstream name;
  name << "GHZ(p=" << p << ") spin flip, ell=" << ell;
  return rec.finish(name.str());
}

CheckCase diagonal_z4(std::uint64_t seed, const SymmetrizationSuiteOptions& options) {
  std::mt19937_64 rng(seed);
  CMatrix site = CMatrix::Identity(2, 2);
  site(1, 1) = cplx(0.0, 1.0);
  const std::vector<CMatrix> gens{kron(site, site)};
  const FiniteGroupRep g = generate_group(gens);
  const DensityMatrix rho = wishart(4, rng);
  const IsotypicDecomposition dec = isotypic_decomposition(g.elements, seed);
  CaseRecorder rec(rho, options.tol);
  rec.path("group average", symmetrize_exact(rho, g.elements));
  rec.path("abelian sectors", symmetrize_abelian_blocks(rho, abelian_irrep_projectors(g, g.elements)));
  rec.path("invariant basis", symmetrize_nonabelian_basis(rho, dec));
  rec.commutant(g.elements);
  rec.decomposition(dec);
  if (g.order() != 4) rec.fail("diagonal Z4 closure did not give four elements");
  return rec.finish("diagonal Z4, two qubits");
}

CheckCase u1_tilted(std::uint64_t seed, const SymmetrizationSuiteOptions& options) {
  std::mt19937_64 rng(seed);
  const double theta = std::uniform_real_distribution<double>(0.3, 2.8)(rng);
  const DensityMatrix rho = reduced_density_matrix(dense_state(tilted_product(theta), 4), 2);
  CMatrix charge = CMatrix::Zero(2, 2);
  charge(0, 0) = cplx(0.0, -1.0);
  const LieGroupRep g = tensor_power(make_lie_group(LieKind::U1, {charge}), 2);
  // Z3 phases separate the total charges 0, 1, 2, so its sectors are the U(1) sectors.
  CMatrix phase = CMatrix::Identity(2, 2);
  phase(1, 1) = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
  const std::vector<CMatrix> gens{kron(phase, phase)};
  const FiniteGroupRep z3 = generate_group(gens);
  const IsotypicDecomposition dec = isotypic_decomposition(g, seed);
  CaseRecorder rec(rho, options.tol);
  const DensityMatrix sectors = symmetrize_abelian_blocks(rho, abelian_irrep_projectors(z3, z3.elements));
  rec.path("charge sectors", sectors);
  rec.path("Z3 average", symmetrize_exact(rho, z3.elements));
  rec.path("invariant basis", symmetrize_nonabelian_basis(rho, dec));
  rec.commutant(g.generators);
  rec.decomposition(dec);
  rec.monte_carlo(symmetrize_haar_mc(rho, g, options.mc_samples, seed), sectors);
  std::ostringstream name;
  name << "U(1) tilted product theta=" << theta << ", two sites";
  return rec.finish(name.str());
}

CheckCase corrupted_control(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<CMatrix> gens{swap_sites(0, 1), swap_sites(1, 2)};
  const FiniteGroupRep g = generate_group(gens);
  const DensityMatrix rho = wishart(8, rng);
  const IsotypicDecomposition dec = isotypic_decomposition(g.elements, seed);
  DensityMatrix bad = symmetrize_exact(rho, g.elements);
  CheckCase c;
  c.name = "corrupted symmetrized state is rejected";
  c.tolerance = 0.0;
  if (dec.components.size() < 2) {
    c.note = "decomposition has a single isotypic component";
    return c;
  }
  const CVector a = dec.components[0].copy_bases[0].col(0);
  const CVector b = dec.components[1].copy_bases[0].col(0);
  bad.matrix += 1e-3 * (a * b.adjoint() + b * a.adjoint());
  try {
    block_structure_check(bad, dec, &rho);
    c.note = "corruption was not detected";
  } catch (const Error& e) {
    c.passed = e.kind() == ErrorKind::StructureViolation;
    c.note = e.what();
  }
  return c;
}

}  // namespace

CheckSummary symmetrization_suite(const SymmetrizationSuiteOptions& options) {
  CheckSummary out;
  for (int i = 0; i < options.cases; ++i) {
    const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(i);
    try {
      switch (i % 5) {
        case 0: out.cases.push_back(su2_two_site(i, seed, options)); break;
        case 1: out.cases.push_back(s3_three_qubits(seed, options)); break;
        case 2: out.cases.push_back(ghz_spin_flip(i, seed, options)); break;
        case 3: out.cases.push_back(diagonal_z4(seed, options)); break;
        default: out.cases.push_back(u1_tilted(seed, options)); break;
      }
    } catch (const Error& e) {
      out.cases.push_back(CheckCase{"case " + std::to_string(i), 0.0, options.tol, false, e.what()});
    }
  }
  out.cases.push_back(corrupted_control(options.seed));
  return out;
}

}  // namespace asymkit
