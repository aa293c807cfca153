#pragma once

// Charged moments, Renyi entropies and entanglement asymmetry of uniform MPS.
//
// A charged moment Tr(rho_A u_1 rho_A u_2 ... rho_A u_n) of an interval of `ell` sites is
// Tr((R_{u_1} (x) ... (x) R_{u_n})^ell P E^{(x)n} P^dagger), where E is the environment of
// the complement: the rank-one fixed point Pi of R in infinite volume, or R^{L-ell} on a
// ring of L sites. P pairs the primed (bra) bond of replica j with the unprimed (ket)
// bond of replica j+1; it is applied as an index rule and never built in production code.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asymkit/linalg.hpp"
#include "asymkit/mps.hpp"
#include "asymkit/symmetry.hpp"

namespace asymkit {

/// Cyclic bond permutation between n replicas.
struct Permutation {
  int n_replicas = 2;

  /// Replica whose ket bond is paired with the bra bond of `replica`.
  int target(int replica) const noexcept { return (replica + 1) % n_replicas; }
  /// Dense D^{2n} x D^{2n} matrix of the rule. Reference only; exponential in n.
  CMatrix dense_matrix(int bond_dim) const;
};

/// Tr((A_1 (x) ... (x) A_n) P (r l^T)^{(x)n} P^dagger) in O(n D^5) without forming D^{2n} objects.
cplx rank_one_contraction(std::span<const CMatrix> blocks, const CVector& left, const CVector& right, int bond_dim);

/// Tr((A_1 (x) ... (x) A_n) P E^{(x)n} P^dagger) for an arbitrary D^2 x D^2 environment.
cplx ring_contraction(std::span<const CMatrix> blocks, const CMatrix& environment, int bond_dim);

struct VolumeMode {
  std::optional<int> ring_length;  // nullopt: infinite volume
  static VolumeMode infinite() { return {}; }
  static VolumeMode finite(int length) { return {length}; }
  bool is_infinite() const noexcept { return !ring_length.has_value(); }
};

struct ChargedMomentResult {
  cplx value;
  int n = 0;
  int ell = 0;
  VolumeMode mode;
  std::vector<double> dominant_moduli;  // spectral radius of each R_{u_j}
  std::optional<cplx> phase_prediction;  // exp(i sum_j phi_j ell) when every |lambda_j| == 1
};

/// Caches the normalized transfer data of one tensor for repeated moment evaluations.
class MomentEvaluator {
 public:
  /// In infinite volume the tensor must be normalized and clustering (NonClustering otherwise).
  explicit MomentEvaluator(const MpsTensor& t, VolumeMode mode = VolumeMode::infinite(),
                           double clustering_tol = 1e-8);

  const MpsTensor& tensor() const noexcept { return tensor_; }
  const TransferOperator& transfer() const noexcept { return plain_; }
  const EigenPair& fixed_point() const noexcept { return fixed_point_; }
  VolumeMode mode() const noexcept { return mode_; }
  int bond_dim() const noexcept { return tensor_.bond_dim(); }

  /// Moment from precomputed blocks A_j = R_{u_j}^ell, normalized by Tr(rho_A) == 1.
  cplx contract(std::span<const CMatrix> blocks, int ell) const;

  /// The ring is closed as Tr(T_1 ... T_n) with one D^2 x D^2 factor per block; factors
  /// depend only on their own block, so group sums can reuse them across tuples.
  CMatrix ring_factor(const CMatrix& block, int ell) const;
  static cplx close_ring(std::span<const CMatrix* const> factors);

  /// Tr(rho_A u_1 ... rho_A u_n); the unitaries must multiply to the identity.
  ChargedMomentResult charged_moment(std::span<const CMatrix> us, int ell) const;

  /// Tr(rho_A^n) for an interval of `ell` sites.
  double renyi_moment(int n, int ell) const;
  /// lim_{ell -> inf} Tr(rho_A^n).
  double renyi_moment_limit(int n) const;

 private:
  MpsTensor tensor_;
  VolumeMode mode_;
  TransferOperator plain_;
  EigenPair fixed_point_;   // infinite mode only
  CMatrix left_, right_;    // fixed points as D x D bond matrices
  cplx ring_norm_ = 1.0;    // finite mode: Tr(R^L)
};

/// S_n of an interval; `ell` == nullopt means the infinite-interval limit.
double renyi_entropy(const MpsTensor& t, int n, std::optional<int> ell);

ChargedMomentResult charged_moment(const MpsTensor& t, std::span<const CMatrix> us, int ell,
                                   VolumeMode mode = VolumeMode::infinite());

enum class FitModel { ExponentialToConstant, LogSlope, ExponentialDecay };

struct FitResult {
  FitModel model = FitModel::LogSlope;
  double constant = 0.0;   // c
  double amplitude = 0.0;  // b
  double rate = 0.0;       // r
  double slope = 0.0;      // m
  double residual_rms = 0.0;
  std::size_t points = 0;
  std::optional<double> reference_rate;  // |lambda_2(R)| for subleading fits
  // Subleading fits: sum over the |lambda_2| eigenspace of |c_k|, where c_k lambda_k^ell is
  // the first-order term of Tr(rho_A^n). When it vanishes the correction starts at
  // order |lambda_2|^{2 ell} and the fitted rate is |lambda_2|^2.
  std::optional<double> first_order_weight;
};

struct AsymmetryReport {
  int n = 2;
  std::string group_descriptor;
  std::vector<int> ell_grid;
  std::vector<double> delta_s;
  std::optional<std::vector<double>> mc_std_err;
  std::optional<FitResult> fit;
  std::optional<std::uint64_t> seed;
  std::vector<int> quadrature_nodes;  // equispaced runs: nodes per angle used at each ell
};

struct AsymmetryOptions {
  std::size_t term_cap = 1'000'000;
  int threads = 1;
  double clustering_tol = 1e-8;
  double quadrature_rel_tol = 1e-10;
  int max_nodes_1d = 1 << 16;
  int max_nodes_2d = 1 << 10;
  double mc_max_rel_err = 0.1;
};

/// Delta S_n from the exact group sum over G^{n-1}.
AsymmetryReport asymmetry_finite_group(const MpsTensor& t, const FiniteGroupRep& g, int n,
                                       std::span<const int> ell_grid, const AsymmetryOptions& options = {});

/// Delta S_n from the Haar integral: equispaced quadrature for up to two U(1) angles,
/// seeded Monte Carlo otherwise.
AsymmetryReport asymmetry_lie_group(const MpsTensor& t, const LieGroupRep& g, int n, std::span<const int> ell_grid,
                                    const AsymmetryOptions& options = {});

/// F = -lim (1/ell) log f = -sum_j log lambda_1(R_{u_j}) + n log lambda_1(R).
cplx free_energy_density(const MpsTensor& t, std::span<const CMatrix> us);

struct HessianResult {
  RMatrix hessian;      // (n-1) * dim(g/h) square, symmetrized, Richardson-extrapolated
  RVector eigenvalues;  // ascending
  RVector gradient;     // central differences at the same step
  bool positive_definite = false;
  double step = 0.0;
};

/// Second derivatives of Re F along coset directions X in (g/h)^{n-1} around
/// g_j = h_j exp(X_j). `h_point` holds the n-1 elements h_j in the representation.
HessianResult hessian_at_subgroup(const MpsTensor& t, const LieGroupRep& g, std::span<const CMatrix> h_point, int n,
                                  double step = 1e-3);

/// Fits Tr(rho_A^n)(ell) - Tr(rho_A^n)(inf) ~ b r^ell by least squares on log|.|;
/// reference_rate holds |lambda_2(R)| and first_order_weight the linear coefficient size.
FitResult subleading_correction_fit(const MpsTensor& t, int n, std::span<const int> ell_grid);

/// Delta S(ell) = c - b r^ell over the whole grid.
FitResult fit_exponential_to_constant(std::span<const double> ell, std::span<const double> values);
/// Delta S(ell) = m log(ell) + c over the last half of the grid.
FitResult fit_log_slope(std::span<const double> ell, std::span<const double> values);

}  // namespace asymkit
