#pragma once

// Symmetry groups acting on the physical leg of an MPS: finite groups generated by
// explicit unitaries, and the U(1) / SU(2) Lie groups with Haar quadrature data.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "asymkit/linalg.hpp"
#include "asymkit/mps.hpp"

namespace asymkit {

/// A finite group given by an explicit unitary representation. Element 0 is the identity.
struct FiniteGroupRep {
  std::vector<CMatrix> elements;
  std::vector<std::vector<std::size_t>> cayley;  // elements[cayley[i][j]] == elements[i] * elements[j]
  std::vector<std::size_t> inverse;
  // Set by quotient_global_phase: the Cayley table then holds up to a global phase.
  bool projective = false;

  std::size_t order() const noexcept { return elements.size(); }
  int dim() const noexcept { return static_cast<int>(elements.front().rows()); }
  bool is_abelian() const;
};

/// Closure of the generators under multiplication. Two elements are identified only when
/// their entries agree to 1e-8; global phases are never quotiented here.
FiniteGroupRep generate_group(std::span<const CMatrix> generators, std::size_t max_order = 1024);

/// Identifies elements that differ by a global phase, keeping the first representative.
/// Used to obtain e.g. the physical Z4 from the order-8 spin-1/2 y-rotation group.
FiniteGroupRep quotient_global_phase(const FiniteGroupRep& g);

/// u_g^{(x) sites} for every element, in element order.
std::vector<CMatrix> site_action(const FiniteGroupRep& g, int sites);

/// Elements of G whose charged transfer operator has unit spectral radius.
struct SubgroupInfo {
  std::vector<std::size_t> elements;  // indices into the group, ascending
  std::vector<double> phases;         // arg of the leading eigenvalue of R_g, per element
  std::size_t order() const noexcept { return elements.size(); }
};

SubgroupInfo detect_invariant_subgroup(const MpsTensor& t, const FiniteGroupRep& g, double tol = 1e-8);

enum class LieKind { U1, SU2 };
enum class QuadratureScheme { Equispaced, MonteCarlo };

struct QuadratureSpec {
  QuadratureScheme scheme = QuadratureScheme::Equispaced;
  int nodes = 64;        // equispaced nodes per angle (starting value; refined adaptively)
  int samples = 20000;   // Monte Carlo sample count
  std::uint64_t seed = 0;
  int batches = 20;      // batch means for the Monte Carlo standard error
};

/// U(1) or SU(2) acting through anti-Hermitian generators X_a.
/// U(1): one generator whose spectrum lies in i*Z, so exp(2 pi X) = 1.
/// SU(2): three generators with [X_a, X_b] = eps_abc X_c (X_a = -i sigma_a / 2 for spin 1/2).
struct LieGroupRep {
  LieKind kind = LieKind::U1;
  std::vector<CMatrix> generators;
  QuadratureSpec quadrature;

  int dim_g() const noexcept { return static_cast<int>(generators.size()); }
  int dim() const noexcept { return static_cast<int>(generators.front().rows()); }
  /// exp(sum_a coords[a] X_a)
  CMatrix element(std::span<const double> coords) const;
};

/// Validates generators (anti-Hermitian, integer U(1) charges, su(2) relations).
LieGroupRep make_lie_group(LieKind kind, std::vector<CMatrix> generators, QuadratureSpec quadrature = {});

/// Generators X_a (x) 1 + 1 (x) X_a ... acting on `sites` copies.
LieGroupRep tensor_power(const LieGroupRep& g, int sites);

/// Invariant subalgebra h of g for a state: the null directions of the quadratic
/// deficit 1 - rho(R_{exp(tX)}) ~ t^2 X^T Q X.
struct SubalgebraInfo {
  RMatrix quadratic_form;  // Q, dim_g x dim_g, in generator coordinates
  RMatrix h_basis;         // columns: orthonormal basis of h
  RMatrix coset_basis;     // columns: orthonormal complement (g/h)
  int dim_h = 0;
};

SubalgebraInfo detect_invariant_subalgebra(const MpsTensor& t, const LieGroupRep& g, double step = 1e-3,
                                           double threshold = 1e-6);

struct QuadNode {
  double angle;
  double weight;
};

/// Equispaced nodes 2 pi k / K with weights 1/K for dα / 2π on [0, 2π).
std::vector<QuadNode> haar_nodes_u1(int nodes);

/// Unit quaternion w + x i + y j + z k, mapped to w*1 - i(x sigma_x + y sigma_y + z sigma_z).
struct Su2Sample {
  double w, x, y, z;
  Eigen::Matrix2cd fundamental() const;
  /// Coordinates c with exp(sum_a c_a X_a) equal to this element for X_a = -i sigma_a / 2.
  std::array<double, 3> coordinates() const;
};

/// i.i.d. Haar samples from normalized Gaussian 4-vectors; deterministic in seed.
std::vector<Su2Sample> haar_sample_su2(int n_samples, std::uint64_t seed);

/// Character-sector projectors of an abelian group acting through `action`
/// (one matrix per group element, in element order).
std::vector<CMatrix> abelian_irrep_projectors(const FiniteGroupRep& g, std::span<const CMatrix> action);

// Common representations.
CMatrix pauli_x();
CMatrix pauli_y();
CMatrix pauli_z();
/// Spin-s matrices (S_x, S_y, S_z) in the basis m = s, s-1, ..., -s.
std::array<CMatrix, 3> spin_matrices(double spin);
/// exp(-i theta S_y) for spin s; for s = 1/2 this is exp(-i theta sigma_y / 2).
CMatrix y_rotation(double theta, double spin = 0.5);
/// Anti-Hermitian SU(2) generators -i S_a for spin s.
std::vector<CMatrix> su2_generators(double spin);

}  // namespace asymkit
