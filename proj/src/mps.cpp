#include "asymkit/mps.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "asymkit/error.hpp"

namespace asymkit {

MpsTensor::MpsTensor(std::vector<CMatrix> site_matrices) : mats_(std::move(site_matrices)) {
  if (mats_.empty()) throw Error(ErrorKind::ShapeMismatch, "MPS tensor needs at least one physical state");
  const auto bond = mats_.front().rows();
  if (bond < 1) throw Error(ErrorKind::ShapeMismatch, "MPS bond dimension must be positive");
  for (const auto& m : mats_) {
    if (m.rows() != bond || m.cols() != bond) {
      throw Error(ErrorKind::ShapeMismatch, "all MPS site matrices must be D x D with the same D");
    }
    require_finite(m, "MPS tensor");
  }
}

MpsTensor MpsTensor::from_array(int phys_dim, int bond_dim, std::span<const cplx> data) {
  if (phys_dim < 1 || bond_dim < 1) throw Error(ErrorKind::ShapeMismatch, "d and D must be positive");
  const auto expected = static_cast<std::size_t>(phys_dim) * bond_dim * bond_dim;
  if (data.size() != expected) {
    std::ostringstream msg;
    msg << "expected " << expected << " entries for d=" << phys_dim << ", D=" << bond_dim << ", got "
        << data.size();
    throw Error(ErrorKind::ShapeMismatch, msg.str());
  }
  std::vector<CMatrix> mats(static_cast<std::size_t>(phys_dim), CMatrix(bond_dim, bond_dim));
  std::size_t k = 0;
  for (auto& m : mats) {
    for (int a = 0; a < bond_dim; ++a) {
      for (int b = 0; b < bond_dim; ++b) m(a, b) = data[k++];
    }
  }
  return MpsTensor(std::move(mats));
}

MpsTensor MpsTensor::scaled(cplx factor) const {
  std::vector<CMatrix> mats = mats_;
  for (auto& m : mats) m *= factor;
  MpsTensor out(std::move(mats));
  out.boundary_ = boundary_;
  return out;
}

MpsTensor MpsTensor::with_boundary(CMatrix boundary) const {
  if (boundary.rows() != bond_dim() || boundary.cols() != bond_dim()) {
    throw Error(ErrorKind::ShapeMismatch, "boundary matrix must be D x D");
  }
  MpsTensor out = *this;
  out.boundary_ = std::move(boundary);
  return out;
}

TransferOperator::TransferOperator(CMatrix matrix, TransferKind kind, std::optional<std::size_t> element)
    : matrix_(std::move(matrix)), kind_(kind), element_(element), cache_(std::make_shared<Cache>()) {
  if (matrix_.rows() != matrix_.cols()) throw Error(ErrorKind::ShapeMismatch, "transfer operator must be square");
  require_finite(matrix_, "transfer operator");
}

const std::vector<EigenPair>& TransferOperator::leading_pairs() const {
  std::call_once(cache_->once, [this] {
    cache_->pairs = eig_leading(matrix_, std::min<Eigen::Index>(2, matrix_.rows()));
  });
  return cache_->pairs;
}

TransferOperator build_transfer_operator(const MpsTensor& t) {
  const int bond = t.bond_dim();
  CMatrix r = CMatrix::Zero(bond * bond, bond * bond);
  for (const auto& m : t.matrices()) r += kron(m, m.conjugate());
  return TransferOperator(std::move(r), TransferKind::Plain);
}

MpsTensor normalize(const MpsTensor& t) {
  const double rho = spectral_radius(build_transfer_operator(t));
  if (rho < 1e-14) throw Error(ErrorKind::ZeroTensor, "transfer operator has vanishing spectral radius");
  return t.scaled(1.0 / std::sqrt(rho));
}

TransferOperator build_charged_transfer(const MpsTensor& t, const CMatrix& u, std::optional<std::size_t> element) {
  const int d = t.phys_dim();
  if (u.rows() != d || u.cols() != d) {
    throw Error(ErrorKind::ShapeMismatch, "symmetry unitary must be d x d");
  }
  if (!is_unitary(u, 1e-10)) throw Error(ErrorKind::NonUnitary, "charged transfer needs a unitary u");
  const int bond = t.bond_dim();
  CMatrix r = CMatrix::Zero(bond * bond, bond * bond);
  // sum_{s'} conj(M_{s'}) u_{s's} = conj(N_s) with N_s = sum_{s'} conj(u_{s's}) M_{s'}
  for (int s = 0; s < d; ++s) {
    CMatrix n = CMatrix::Zero(bond, bond);
    for (int sp = 0; sp < d; ++sp) n += std::conj(u(sp, s)) * t[sp];
    r += kron(t[s], n.conjugate());
  }
  return TransferOperator(std::move(r), TransferKind::Charged, element);
}

double spectral_radius(const TransferOperator& r) { return std::abs(r.leading_pairs().front().value); }

double numerical_radius(const CMatrix& m, int iters) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::ShapeMismatch, "numerical_radius needs a square matrix");
  iters = std::max(iters, 8);
  // For every angle the top eigenvector of Herm(e^{i theta} m) is a feasible unit vector,
  // so |v^dagger m v| at that vector is a valid lower bound; refine around the best angle.
  double best = 0.0;
  double best_theta = 0.0;
  auto attained = [&](double theta) {
    const CMatrix rotated = std::polar(1.0, theta) * m;
    const CMatrix herm = 0.5 * (rotated + rotated.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm);
    const CVector v = solver.eigenvectors().col(herm.rows() - 1);
    return std::abs(v.dot(m * v));
  };
  for (int k = 0; k < iters; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / iters;
    const double value = attained(theta);
    if (value > best) {
      best = value;
      best_theta = theta;
    }
  }
  double lo = best_theta - 2.0 * std::numbers::pi / iters;
  double hi = best_theta + 2.0 * std::numbers::pi / iters;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double x1 = hi - golden * (hi - lo);
    const double x2 = lo + golden * (hi - lo);
    const double f1 = attained(x1);
    const double f2 = attained(x2);
    best = std::max({best, f1, f2});
    if (f1 > f2) {
      hi = x2;
    } else {
      lo = x1;
    }
  }
  return best;
}

double numerical_radius(const TransferOperator& r, int iters) { return numerical_radius(r.matrix(), iters); }

ClusteringReport clustering_check(const MpsTensor& t, double tol) {
  const auto r = build_transfer_operator(t);
  const auto& pairs = r.leading_pairs();
  ClusteringReport report;
  report.leading_modulus = std::abs(pairs.front().value);
  report.subleading_modulus = pairs.size() > 1 ? std::abs(pairs[1].value) : 0.0;
  report.gap_ratio = report.leading_modulus > 0.0 ? report.subleading_modulus / report.leading_modulus : 1.0;
  report.is_clustering = report.gap_ratio < 1.0 - tol;
  if (!report.is_clustering) {
    report.correlation_length = std::numeric_limits<double>::infinity();
  } else if (report.gap_ratio == 0.0) {
    report.correlation_length = 0.0;
  } else {
    report.correlation_length = -1.0 / std::log(report.gap_ratio);
  }
  return report;
}

EigenPair fixed_point_projector(const TransferOperator& r, double tol) {
  const auto& pairs = r.leading_pairs();
  if (pairs.size() > 1) {
    const double lead = std::abs(pairs[0].value);
    if (lead == 0.0 || std::abs(pairs[1].value) / lead >= 1.0 - tol) {
      throw Error(ErrorKind::DegenerateLeading,
                  "leading transfer eigenvalue is degenerate in modulus; the state is not clustering");
    }
  }
  return pairs.front();
}

MpsTensor block_sites(const MpsTensor& t, int k) {
  if (k < 1) throw Error(ErrorKind::BadParam, "block size must be >= 1");
  std::vector<CMatrix> current(t.matrices().begin(), t.matrices().end());
  for (int step = 1; step < k; ++step) {
    std::vector<CMatrix> next;
    next.reserve(current.size() * static_cast<std::size_t>(t.phys_dim()));
    for (const auto& left : current) {
      for (const auto& right : t.matrices()) next.push_back(left * right);
    }
    current = std::move(next);
  }
  return MpsTensor(std::move(current));
}

CMatrix as_bond_matrix(const CVector& v, int bond_dim) {
  if (v.size() != static_cast<Eigen::Index>(bond_dim) * bond_dim) {
    throw Error(ErrorKind::ShapeMismatch, "vector length must be D^2");
  }
  CMatrix out(bond_dim, bond_dim);
  for (int a = 0; a < bond_dim; ++a) {
    for (int ap = 0; ap < bond_dim; ++ap) out(a, ap) = v[a * bond_dim + ap];
  }
  return out;
}

}  // namespace asymkit
