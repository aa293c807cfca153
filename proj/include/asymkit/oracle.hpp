#pragma once

// Brute-force ground truth on finite rings: dense state vectors, exact reduced density
// matrices, explicit symmetrization and exact asymmetries.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asymkit/linalg.hpp"
#include "asymkit/mps.hpp"
#include "asymkit/symmetry.hpp"

namespace asymkit {

inline constexpr std::size_t kDenseStateCap = std::size_t{1} << 22;
inline constexpr Eigen::Index kSymmetrizeCap = 4096;

/// Amplitudes Tr(B M_{s_1} ... M_{s_L}) normalized, with s_1 the slowest index and B the
/// tensor's boundary matrix (identity when absent).
struct DenseState {
  int length = 0;
  int phys_dim = 0;
  CVector amplitudes;
};

/// Hermitian, positive semidefinite, unit trace.
struct DensityMatrix {
  CMatrix matrix;
  Eigen::Index dim() const noexcept { return matrix.rows(); }
};

/// Checks Hermiticity (1e-12), trace (1e-10) and, up to dimension 512, eigenvalues >= -1e-10.
/// Throws StructureViolation.
void validate_density_matrix(const DensityMatrix& rho);

DenseState dense_state(const MpsTensor& t, int length, std::size_t cap = kDenseStateCap);

/// Partial trace over sites ell+1 .. L.
DensityMatrix reduced_density_matrix(const DenseState& psi, int ell);

/// rho_A of the first `ell` sites of a ring of `length` sites, built by contracting the
/// complement one site at a time. Never forms the d^L state, so L = 30 is cheap.
DensityMatrix ring_reduced_density_matrix(const MpsTensor& t, int length, int ell);

/// Nonzero spectrum (descending, at most D^2 values) of the same rho_A, from the D^2 x D^2
/// Gram matrix of the interval strings. Reaches d^ell up to `cap` without forming rho_A.
std::vector<double> ring_reduced_spectrum(const MpsTensor& t, int length, int ell, std::size_t cap = kDenseStateCap);

/// (1/|G|) sum_g U_g rho U_g^dagger over the given matrices (already acting on ell sites).
DensityMatrix symmetrize_exact(const DensityMatrix& rho, std::span<const CMatrix> action);

struct HaarSymmetrization {
  DensityMatrix rho;
  RMatrix std_err;          // entrywise standard error of the Monte Carlo mean
  double commutant_defect;  // max_a ||[X_a, rho~]||_max
};

/// Monte Carlo Haar average; `g` must act on the ell-site space (see tensor_power).
HaarSymmetrization symmetrize_haar_mc(const DensityMatrix& rho, const LieGroupRep& g, int samples,
                                      std::uint64_t seed);

/// sum_sigma P_sigma rho P_sigma.
DensityMatrix symmetrize_abelian_blocks(const DensityMatrix& rho, std::span<const CMatrix> projectors);

/// One isotypic component: `copy_bases[j]` (dim x irrep_dim, orthonormal columns) spans
/// copy j, and the bases are aligned so the group acts by the same matrices on every copy.
struct IsotypicComponent {
  int irrep_dim = 0;
  std::vector<CMatrix> copy_bases;
  int copies() const noexcept { return static_cast<int>(copy_bases.size()); }
};

struct IsotypicDecomposition {
  std::vector<IsotypicComponent> components;
};

/// Numerical decomposition of a finite group action: eigenspaces of a group-averaged
/// random Hermitian matrix, grouped and aligned by averaged intertwiners.
IsotypicDecomposition isotypic_decomposition(std::span<const CMatrix> action, std::uint64_t seed = 7);

/// Same for a Lie algebra action: commutant and intertwiners as null spaces of the
/// generator commutator maps (dimension at most 64).
IsotypicDecomposition isotypic_decomposition(const LieGroupRep& g, std::uint64_t seed = 7);

/// rho~ = sum <I_{sigma,jj'}, rho> I_{sigma,jj'} with I = (dim sigma)^{-1/2} sum_a |sigma,j,a><sigma,j',a|.
DensityMatrix symmetrize_nonabelian_basis(const DensityMatrix& rho, const IsotypicDecomposition& dec);

struct BlockStructureReport {
  double max_cross_block = 0.0;         // blocks between distinct irreps
  double max_identity_deviation = 0.0;  // copy-pair blocks minus their scalar part
  double max_trace_mismatch = 0.0;      // block traces of rho~ versus rho
};

/// Verifies the block structure of a symmetrized state; throws StructureViolation naming
/// the first offending block. `rho` (the pre-symmetrization state) enables the trace check.
BlockStructureReport block_structure_check(const DensityMatrix& rho_tilde, const IsotypicDecomposition& dec,
                                           const DensityMatrix* rho = nullptr, double tol = 1e-10);

/// Tr(rho^n) from the spectrum.
double exact_renyi_moment(const DensityMatrix& rho, int n);

/// (1/(1-n)) log(Tr rho~^n / Tr rho^n)
double exact_asymmetry(const DensityMatrix& rho, const DensityMatrix& rho_tilde, int n);

/// Tr(rho u_1 rho u_2 ... rho u_n) by dense multiplication; u_j act on the ell sites.
cplx exact_charged_moment(const DensityMatrix& rho, std::span<const CMatrix> us);

}  // namespace asymkit
