#pragma once

// Uniform (translation-invariant) matrix product states and their transfer operators.
//
// Index convention, fixed project-wide: a transfer operator is a D^2 x D^2 matrix with
// row index a*D + a' and column index b*D + b'. Unprimed indices belong to the ket
// tensor M, primed indices to the complex-conjugated bra tensor.

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "asymkit/linalg.hpp"

namespace asymkit {

/// Site tensor M of a uniform MPS, stored as d matrices of size D x D.
class MpsTensor {
 public:
  explicit MpsTensor(std::vector<CMatrix> site_matrices);

  /// `data` ordered (s, a, b) row-major, length d*D*D.
  static MpsTensor from_array(int phys_dim, int bond_dim, std::span<const cplx> data);

  int phys_dim() const noexcept { return static_cast<int>(mats_.size()); }
  int bond_dim() const noexcept { return static_cast<int>(mats_.front().rows()); }
  const CMatrix& operator[](int s) const { return mats_[static_cast<std::size_t>(s)]; }
  std::span<const CMatrix> matrices() const noexcept { return mats_; }

  MpsTensor scaled(cplx factor) const;

  /// Optional boundary matrix B for finite rings: amplitudes Tr(B M_{s1} ... M_{sL}).
  /// Only the brute-force oracle reads it; transfer operators ignore it.
  const std::optional<CMatrix>& boundary() const noexcept { return boundary_; }
  MpsTensor with_boundary(CMatrix boundary) const;

 private:
  std::vector<CMatrix> mats_;
  std::optional<CMatrix> boundary_;
};

enum class TransferKind { Plain, Charged };

/// A plain (R) or charged (R_g) transfer operator with lazily computed leading spectrum.
class TransferOperator {
 public:
  TransferOperator(CMatrix matrix, TransferKind kind, std::optional<std::size_t> element = std::nullopt);

  const CMatrix& matrix() const noexcept { return matrix_; }
  Eigen::Index dim() const noexcept { return matrix_.rows(); }
  TransferKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> element() const noexcept { return element_; }

  /// Up to two leading eigenpairs, computed once; safe for concurrent readers.
  const std::vector<EigenPair>& leading_pairs() const;

 private:
  struct Cache {
    std::once_flag once;
    std::vector<EigenPair> pairs;
  };
  CMatrix matrix_;
  TransferKind kind_;
  std::optional<std::size_t> element_;
  std::shared_ptr<Cache> cache_;
};

struct ClusteringReport {
  double leading_modulus = 0.0;
  double subleading_modulus = 0.0;
  double gap_ratio = 0.0;  // subleading / leading
  bool is_clustering = false;
  double correlation_length = 0.0;  // -1/log(gap_ratio); +inf when not clustering
};

/// R_{(a,a')(b,b')} = sum_s (M_s)_{ab} conj(M_s)_{a'b'}
TransferOperator build_transfer_operator(const MpsTensor& t);

/// Rescales t so that the spectral radius of its transfer operator is 1.
MpsTensor normalize(const MpsTensor& t);

/// (R_g)_{(a,a')(b,b')} = sum_{s,s'} (M_s)_{ab} conj(M_{s'})_{a'b'} (u)_{s's}
TransferOperator build_charged_transfer(const MpsTensor& t, const CMatrix& u,
                                        std::optional<std::size_t> element = std::nullopt);

double spectral_radius(const TransferOperator& r);

/// Lower bound on sup_v |<v|R|v>| / <v|v>. Diagnostic only; asymptotics use spectral_radius.
double numerical_radius(const TransferOperator& r, int iters = 64);
double numerical_radius(const CMatrix& m, int iters = 64);

ClusteringReport clustering_check(const MpsTensor& t, double tol = 1e-8);

/// Leading eigenpair with left^T right == 1, so Pi = right left^T is a rank-one projector.
/// Throws DegenerateLeading when the leading modulus is not separated.
EigenPair fixed_point_projector(const TransferOperator& r, double tol = 1e-8);

/// Merges k consecutive sites into one with physical dimension d^k (first site slowest).
MpsTensor block_sites(const MpsTensor& t, int k);

/// Right/left fixed point vector reshaped to a D x D matrix, entry (a, a').
CMatrix as_bond_matrix(const CVector& v, int bond_dim);

}  // namespace asymkit
