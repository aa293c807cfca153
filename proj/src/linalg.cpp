#include "asymkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "asymkit/error.hpp"

namespace asymkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonUnitary: return "NonUnitary";
    case ErrorKind::ZeroTensor: return "ZeroTensor";
    case ErrorKind::DegenerateLeading: return "DegenerateLeading";
    case ErrorKind::NonClustering: return "NonClustering";
    case ErrorKind::OrderExceeded: return "OrderExceeded";
    case ErrorKind::ClosureViolation: return "ClosureViolation";
    case ErrorKind::NonAbelian: return "NonAbelian";
    case ErrorKind::ProductNotIdentity: return "ProductNotIdentity";
    case ErrorKind::TermCapExceeded: return "TermCapExceeded";
    case ErrorKind::MCVarianceTooLarge: return "MCVarianceTooLarge";
    case ErrorKind::FitIllConditioned: return "FitIllConditioned";
    case ErrorKind::BadParam: return "BadParam";
    case ErrorKind::CriticalRegime: return "CriticalRegime";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::DecompositionFailed: return "DecompositionFailed";
    case ErrorKind::StructureViolation: return "StructureViolation";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Unknown";
}

void require_finite(const CMatrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::NonFinite, std::string(what) + " has non-finite entries");
  }
}

namespace {

// Descending modulus, ties (relative 1e-10) resolved by larger real part.
std::vector<Eigen::Index> modulus_order(const CVector& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double scale = values.size() > 0 ? values.cwiseAbs().maxCoeff() : 0.0;
  const double tie = 1e-10 * std::max(scale, 1e-300);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(values[a]);
    const double mb = std::abs(values[b]);
    if (std::abs(ma - mb) > tie) return ma > mb;
    return values[a].real() > values[b].real();
  });
  return order;
}

std::vector<EigenPair> dense_leading(const CMatrix& m, Eigen::Index how_many) {
  Eigen::ComplexEigenSolver<CMatrix> solver(m, true);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NonConvergence, "dense complex eigensolver failed");
  }
  const CVector& values = solver.eigenvalues();
  const CMatrix& vectors = solver.eigenvectors();
  const auto order = modulus_order(values);

  Eigen::PartialPivLU<CMatrix> lu(vectors);
  const CMatrix inverse = lu.inverse();
  const bool well_conditioned = inverse.allFinite() && (inverse * vectors - CMatrix::Identity(m.rows(), m.cols()))
                                                               .cwiseAbs()
                                                               .maxCoeff() < 1e-6;

  std::vector<EigenPair> out;
  out.reserve(static_cast<std::size_t>(how_many));
  for (Eigen::Index k = 0; k < how_many; ++k) {
    const Eigen::Index idx = order[static_cast<std::size_t>(k)];
    EigenPair pair;
    pair.value = values[idx];
    pair.right = vectors.col(idx);
    if (well_conditioned) {
      pair.left = inverse.row(idx).transpose();
    } else {
      // Defective or nearly defective: take the left vector from the null space of
      // (m^T - lambda) and normalize against the right vector when possible.
      const CMatrix shifted = m.transpose() - pair.value * CMatrix::Identity(m.rows(), m.cols());
      Eigen::JacobiSVD<CMatrix> svd(shifted, Eigen::ComputeFullV);
      pair.left = svd.matrixV().col(m.cols() - 1);
      const cplx overlap = (pair.left.transpose() * pair.right)(0, 0);
      if (std::abs(overlap) > 1e-12) pair.left /= overlap;
    }
    out.push_back(std::move(pair));
  }
  return out;
}

constexpr Eigen::Index kDenseCap = 4096;

std::vector<EigenPair> power_leading(const CMatrix& m, Eigen::Index how_many, double tol, int max_iterations) {
  const Eigen::Index n = m.rows();
  const double norm = std::max(m.norm(), 1e-300);
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  auto random_vector = [&] {
    CVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(gauss(rng), gauss(rng));
    return CVector(v.normalized());
  };

  std::vector<EigenPair> found;
  auto apply = [&](const CVector& v) {
    CVector out = m * v;
    for (const auto& p : found) out -= p.value * p.right * (p.left.transpose() * v)(0, 0);
    return out;
  };
  auto apply_t = [&](const CVector& v) {
    CVector out = m.transpose() * v;
    for (const auto& p : found) out -= p.value * p.left * (p.right.transpose() * v)(0, 0);
    return out;
  };
  auto iterate = [&](auto&& op, cplx& value) -> CVector {
    CVector v = random_vector();
    for (int it = 0; it < max_iterations; ++it) {
      CVector w = op(v);
      value = v.dot(w);  // v is unit norm
      if ((w - value * v).norm() <= tol * norm) return v;
      const double wn = w.norm();
      if (wn == 0.0) {
        value = 0.0;
        return v;
      }
      v = w / wn;
    }
    std::ostringstream msg;
    msg << "power iteration stagnated after " << max_iterations << " iterations";
    throw Error(ErrorKind::NonConvergence, msg.str());
  };

  for (Eigen::Index k = 0; k < how_many; ++k) {
    cplx value_r, value_l;
    CVector right = iterate(apply, value_r);
    CVector left = iterate(apply_t, value_l);
    const cplx overlap = (left.transpose() * right)(0, 0);
    if (std::abs(overlap) < 1e-14) {
      throw Error(ErrorKind::NonConvergence, "left and right power-iteration vectors are orthogonal");
    }
    left /= overlap;
    found.push_back({value_r, left, right});
  }
  return found;
}

}  // namespace

std::vector<EigenPair> eig_leading(const CMatrix& m, Eigen::Index how_many, double tol, const EigOptions& options) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::ShapeMismatch, "eig_leading needs a square matrix");
  if (how_many < 1 || how_many > m.rows()) {
    throw Error(ErrorKind::BadParam, "eig_leading: how_many must lie in [1, dimension]");
  }
  require_finite(m, "eig_leading input");
  if (m.rows() <= options.dense_threshold) return dense_leading(m, how_many);
  try {
    return power_leading(m, how_many, tol, options.max_iterations);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NonConvergence) throw;
    if (m.rows() <= kDenseCap) return dense_leading(m, how_many);
    std::ostringstream msg;
    msg << e.what() << "; dense fallback refused, dimension " << m.rows() << " exceeds " << kDenseCap;
    throw Error(ErrorKind::NonConvergence, msg.str());
  }
}

CVector eigenvalues_by_modulus(const CMatrix& m) {
  Eigen::ComplexEigenSolver<CMatrix> solver(m, false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NonConvergence, "dense complex eigensolver failed");
  }
  const CVector& values = solver.eigenvalues();
  const auto order = modulus_order(values);
  CVector sorted(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) sorted[i] = values[order[static_cast<std::size_t>(i)]];
  return sorted;
}

CMatrix matrix_power(const CMatrix& m, unsigned long long k) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::ShapeMismatch, "matrix_power needs a square matrix");
  CMatrix result = CMatrix::Identity(m.rows(), m.cols());
  CMatrix base = m;
  while (k > 0) {
    if (k & 1ULL) result = result * base;
    k >>= 1ULL;
    if (k > 0) base = base * base;
  }
  return result;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix kron_power(const CMatrix& u, int count) {
  CMatrix out = CMatrix::Identity(1, 1);
  for (int i = 0; i < count; ++i) out = kron(out, u);
  return out;
}

bool is_unitary(const CMatrix& u, double tol) {
  if (u.rows() != u.cols()) return false;
  return max_abs_diff(u * u.adjoint(), CMatrix::Identity(u.rows(), u.cols())) <= tol;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "max_abs_diff: shapes differ");
  }
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

CMatrix expm_antihermitian(const CMatrix& x) {
  const CMatrix hermitian = cplx(0.0, 1.0) * x;  // iX is Hermitian
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (hermitian + hermitian.adjoint()));
  const RVector& lambda = solver.eigenvalues();
  CVector phases(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) phases[i] = std::polar(1.0, -lambda[i]);
  return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

namespace {

template <class T>
T pairwise_impl(std::span<const T> values) {
  if (values.empty()) return T{};
  if (values.size() <= 8) {
    T acc{};
    for (const T& v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_impl(values.first(half)) + pairwise_impl(values.subspan(half));
}

}  // namespace

cplx pairwise_sum(std::span<const cplx> values) { return pairwise_impl(values); }
double pairwise_sum(std::span<const double> values) { return pairwise_impl(values); }

CMatrix null_space(const CMatrix& a, double tol) {
  Eigen::BDCSVD<CMatrix> svd(a, Eigen::ComputeFullV);
  const RVector& sigma = svd.singularValues();
  const double cutoff = tol * std::max(1.0, sigma.size() > 0 ? sigma[0] : 0.0);
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma[rank] > cutoff) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

CMatrix random_unitary(int dim, std::uint64_t seed) {
  if (dim < 1) throw Error(ErrorKind::BadParam, "unitary dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  CMatrix z(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) z(i, j) = cplx(normal(rng), normal(rng));
  }
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ() * CMatrix::Identity(dim, dim);
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    const double mod = std::abs(r(j, j));
    if (mod > 0.0) q.col(j) *= r(j, j) / mod;
  }
  return q;
}

}  // namespace asymkit
