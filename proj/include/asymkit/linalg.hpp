#pragma once

// Dense complex linear algebra kernel shared by every other module.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace asymkit {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Leading eigen-triple of a square matrix.
///
/// `left` and `right` are biorthonormal: left^T * right == 1 (plain
/// transpose, no conjugation), so the rank-one projector onto the
/// eigen-direction is right * left^T.
struct EigenPair {
  cplx value;
  CVector left;
  CVector right;
};

struct EigOptions {
  // At or below this dimension the full dense decomposition is used directly. Above it,
  // power iteration runs and falls back to the dense solver on stagnation up to 4096.
  Eigen::Index dense_threshold = 4096;
  int max_iterations = 20000;
};

/// Throws NonFinite when any entry is NaN or Inf.
void require_finite(const CMatrix& m, const char* what);

/// The `how_many` eigenpairs of largest modulus, sorted by descending modulus.
/// Ties in modulus are broken towards the larger real part.
std::vector<EigenPair> eig_leading(const CMatrix& m, Eigen::Index how_many, double tol = 1e-10,
                                   const EigOptions& options = {});

/// All eigenvalues sorted by descending modulus (ties: larger real part first).
CVector eigenvalues_by_modulus(const CMatrix& m);

/// m^k by repeated squaring; k == 0 gives the identity.
CMatrix matrix_power(const CMatrix& m, unsigned long long k);

/// Kronecker product a (x) b; the index of `a` is the slow one.
CMatrix kron(const CMatrix& a, const CMatrix& b);

/// u^{(x) count}.
CMatrix kron_power(const CMatrix& u, int count);

bool is_unitary(const CMatrix& u, double tol = 1e-10);

/// Haar-random dim x dim unitary (QR of a complex Gaussian matrix with the phase fix).
CMatrix random_unitary(int dim, std::uint64_t seed);

/// max_ij |a_ij - b_ij|
double max_abs_diff(const CMatrix& a, const CMatrix& b);

/// exp(X) for anti-Hermitian X, computed through the Hermitian eigenproblem of iX
/// so the result is unitary to machine precision.
CMatrix expm_antihermitian(const CMatrix& x);

/// Pairwise (cascade) summation in index order; result independent of threading.
cplx pairwise_sum(std::span<const cplx> values);
double pairwise_sum(std::span<const double> values);

/// Orthonormal basis (columns) of the null space of `a`, using singular values below
/// `tol * max(1, sigma_max)`.
CMatrix null_space(const CMatrix& a, double tol = 1e-9);

}  // namespace asymkit
