#include "asymkit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "asymkit/error.hpp"

namespace asymkit {

namespace {

constexpr Eigen::Index kPsdCheckCap = 512;
constexpr Eigen::Index kNullSpaceCap = 64;

std::size_t checked_power(int base, int exponent, std::size_t cap) {
  std::size_t out = 1;
  for (int i = 0; i < exponent; ++i) {
    if (out > cap / static_cast<std::size_t>(base)) {
      std::ostringstream msg;
      msg << base << "^" << exponent << " exceeds the dense cap " << cap;
      throw Error(ErrorKind::CapExceeded, msg.str());
    }
    out *= static_cast<std::size_t>(base);
  }
  return out;
}

// Products M_{s_1} ... M_{s_k} for every string, s_1 slowest.
std::vector<CMatrix> string_products(const MpsTensor& t, int sites) {
  const int bond = t.bond_dim();
  std::vector<CMatrix> current{CMatrix::Identity(bond, bond)};
  for (int k = 0; k < sites; ++k) {
    std::vector<CMatrix> next;
    next.reserve(current.size() * static_cast<std::size_t>(t.phys_dim()));
    for (const auto& p : current) {
      for (int s = 0; s < t.phys_dim(); ++s) next.push_back(p * t[s]);
    }
    current = std::move(next);
  }
  return current;
}

CMatrix boundary_of(const MpsTensor& t) {
  return t.boundary() ? *t.boundary() : CMatrix::Identity(t.bond_dim(), t.bond_dim());
}

// env[(b,b'),(a,a')] = sum over complement strings W of W[b,a] conj(W[b',a'])
CMatrix complement_environment(const MpsTensor& t, int sites) {
  const int bond = t.bond_dim();
  const int d2 = bond * bond;
  CMatrix env = CMatrix::Identity(d2, d2);
  for (int site = 0; site < sites; ++site) {
    CMatrix next = CMatrix::Zero(d2, d2);
    for (int s = 0; s < t.phys_dim(); ++s) {
      const CMatrix& m = t[s];
      for (int row = 0; row < d2; ++row) {
        for (int c = 0; c < bond; ++c) {
          for (int cp = 0; cp < bond; ++cp) {
            const cplx e = env(row, c * bond + cp);
            if (e == cplx(0.0)) continue;
            for (int a = 0; a < bond; ++a) {
              for (int ap = 0; ap < bond; ++ap) next(row, a * bond + ap) += e * m(c, a) * std::conj(m(cp, ap));
            }
          }
        }
      }
    }
    env = std::move(next);
  }
  return env;
}

DensityMatrix finish(CMatrix m) {
  m = 0.5 * (m + m.adjoint()).eval();
  const cplx tr = m.trace();
  if (!(std::abs(tr) > 0.0)) throw Error(ErrorKind::ZeroTensor, "reduced density matrix has zero trace");
  m /= tr.real();
  DensityMatrix rho{std::move(m)};
  validate_density_matrix(rho);
  return rho;
}

void check_action(const DensityMatrix& rho, std::span<const CMatrix> mats) {
  if (rho.dim() > kSymmetrizeCap) throw Error(ErrorKind::CapExceeded, "symmetrization is capped at dimension 4096");
  for (const auto& u : mats) {
    if (u.rows() != rho.dim() || u.cols() != rho.dim()) {
      throw Error(ErrorKind::ShapeMismatch, "group action dimension differs from rho");
    }
  }
}

CMatrix random_hermitian(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  CMatrix h(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      h(i, j) = cplx(re, im);
    }
  }
  return 0.5 * (h + h.adjoint());
}

CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      m(i, j) = cplx(re, im);
    }
  }
  return m;
}

// Strategy for the two decomposition front ends: a generic commutant element, and the
// projection of a matrix onto intertwiners between two invariant subspaces.
struct ActionModel {
  std::vector<CMatrix> mats;
  bool finite = true;  // true: group elements (averaging); false: Lie generators (null spaces)

  CMatrix generic_commutant(std::mt19937_64& rng) const {
    const Eigen::Index dim = mats.front().rows();
    if (finite) {
      const CMatrix h = random_hermitian(dim, rng);
      CMatrix c = CMatrix::Zero(dim, dim);
      for (const auto& u : mats) c += u * h * u.adjoint();
      return c / static_cast<double>(mats.size());
    }
    const CMatrix basis = commutation_null_space(mats, mats);
    std::normal_distribution<double> normal;
    CMatrix c = CMatrix::Zero(dim, dim);
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
      c += normal(rng) * Eigen::Map<const CMatrix>(basis.col(k).data(), dim, dim);
    }
    return 0.5 * (c + c.adjoint());
  }

  // T with rep_i(a) T = T rep_j(a) for all a; zero matrix when the irreps differ.
  CMatrix intertwiner(const CMatrix& qi, const CMatrix& qj, std::mt19937_64& rng) const {
    std::vector<CMatrix> rep_i;
    std::vector<CMatrix> rep_j;
    for (const auto& a : mats) {
      rep_i.push_back(qi.adjoint() * a * qi);
      rep_j.push_back(qj.adjoint() * a * qj);
    }
    if (finite) {
      const CMatrix z = random_matrix(qi.cols(), qj.cols(), rng);
      CMatrix t = CMatrix::Zero(qi.cols(), qj.cols());
      for (std::size_t g = 0; g < rep_i.size(); ++g) t += rep_i[g] * z * rep_j[g].adjoint();
      return t / static_cast<double>(rep_i.size());
    }
    const CMatrix basis = commutation_null_space(rep_i, rep_j);
    if (basis.cols() == 0) return CMatrix::Zero(qi.cols(), qj.cols());
    return Eigen::Map<const CMatrix>(basis.col(0).data(), qi.cols(), qj.cols());
  }

  // Null space of T -> a_k T - T b_k (all k), as column-major vectorized matrices.
  static CMatrix commutation_null_space(const std::vector<CMatrix>& a, const std::vector<CMatrix>& b) {
    const Eigen::Index rows = a.front().rows();
    const Eigen::Index cols = b.front().rows();
    const Eigen::Index n = rows * cols;
    CMatrix system(n * static_cast<Eigen::Index>(a.size()), n);
    for (std::size_t k = 0; k < a.size(); ++k) {
      // vec(A T) = (I (x) A) vec T, vec(T B) = (B^T (x) I) vec T for column-major vec
      system.middleRows(static_cast<Eigen::Index>(k) * n, n) =
          kron(CMatrix::Identity(cols, cols), a[k]) - kron(b[k].transpose(), CMatrix::Identity(rows, rows));
    }
    return null_space(system, 1e-9);
  }
};

IsotypicDecomposition decompose(const ActionModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::Index dim = model.mats.front().rows();
  const CMatrix c = model.generic_commutant(rng);
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(c);
  const RVector& evals = solver.eigenvalues();
  const double spread = std::max(evals.maxCoeff() - evals.minCoeff(), 1.0);

  std::vector<CMatrix> subspaces;
  for (Eigen::Index start = 0; start < dim;) {
    Eigen::Index stop = start + 1;
    while (stop < dim && evals[stop] - evals[stop - 1] < 1e-8 * spread) ++stop;
    subspaces.push_back(solver.eigenvectors().middleCols(start, stop - start));
    start = stop;
  }

  IsotypicDecomposition dec;
  std::vector<bool> used(subspaces.size(), false);
  for (std::size_t i = 0; i < subspaces.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    IsotypicComponent comp;
    comp.irrep_dim = static_cast<int>(subspaces[i].cols());
    comp.copy_bases.push_back(subspaces[i]);
    for (std::size_t j = i + 1; j < subspaces.size(); ++j) {
      if (used[j] || subspaces[j].cols() != subspaces[i].cols()) continue;
      const CMatrix t = model.intertwiner(subspaces[i], subspaces[j], rng);
      const double scale = std::sqrt(t.squaredNorm() / static_cast<double>(t.rows()));
      if (scale < 1e-8) continue;
      const CMatrix w = t / scale;
      if (!is_unitary(w, 1e-6)) {
        throw Error(ErrorKind::DecompositionFailed,
                    "intertwiner between equivalent subspaces is not unitary; eigenspaces are not irreducible");
      }
      used[j] = true;
      comp.copy_bases.push_back(subspaces[j] * w.adjoint());
    }
    dec.components.push_back(std::move(comp));
  }

  // each subspace must be invariant under the action
  for (const auto& comp : dec.components) {
    for (const auto& q : comp.copy_bases) {
      const CMatrix proj = q * q.adjoint();
      for (const auto& a : model.mats) {
        if (max_abs_diff(proj * a * q, a * q) > 1e-8) {
          throw Error(ErrorKind::DecompositionFailed, "eigenspace of the commutant element is not invariant");
        }
      }
    }
  }
  return dec;
}

}  // namespace

void validate_density_matrix(const DensityMatrix& rho) {
  const CMatrix& m = rho.matrix;
  if (m.rows() != m.cols() || m.rows() == 0) throw Error(ErrorKind::StructureViolation, "density matrix not square");
  require_finite(m, "density matrix");
  if (max_abs_diff(m, m.adjoint()) > 1e-12) throw Error(ErrorKind::StructureViolation, "density matrix not Hermitian");
  if (std::abs(m.trace() - cplx(1.0)) > 1e-10) throw Error(ErrorKind::StructureViolation, "density matrix trace != 1");
  if (m.rows() <= kPsdCheckCap) {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(m, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -1e-10) {
      throw Error(ErrorKind::StructureViolation, "density matrix has a negative eigenvalue");
    }
  }
}

DenseState dense_state(const MpsTensor& t, int length, std::size_t cap) {
  if (length < 1) throw Error(ErrorKind::BadParam, "chain length must be >= 1");
  const std::size_t total = checked_power(t.phys_dim(), length, cap);
  const int head = length / 2;
  const auto prefix = string_products(t, head);
  const auto suffix = string_products(t, length - head);
  const CMatrix boundary = boundary_of(t);
  DenseState psi{length, t.phys_dim(), CVector(static_cast<Eigen::Index>(total))};
  std::size_t k = 0;
  for (const auto& p : prefix) {
    const CMatrix left = boundary * p;
    for (const auto& s : suffix) psi.amplitudes[static_cast<Eigen::Index>(k++)] = left.transpose().cwiseProduct(s).sum();
  }
  const double norm = psi.amplitudes.norm();
  if (!(norm > 0.0)) throw Error(ErrorKind::ZeroTensor, "MPS amplitudes vanish on this ring");
  psi.amplitudes /= norm;
  return psi;
}

DensityMatrix reduced_density_matrix(const DenseState& psi, int ell) {
  if (ell < 1 || ell > psi.length) throw Error(ErrorKind::BadParam, "need 1 <= ell <= L");
  const auto rows = static_cast<Eigen::Index>(checked_power(psi.phys_dim, ell, kDenseStateCap));
  const Eigen::Index cols = psi.amplitudes.size() / rows;
  if (rows > kSymmetrizeCap) throw Error(ErrorKind::CapExceeded, "reduced density matrix larger than 4096");
  // column-major map: view(b, a) = psi[a * cols + b]
  const Eigen::Map<const CMatrix> view(psi.amplitudes.data(), cols, rows);
  return finish(view.transpose() * view.conjugate());
}

DensityMatrix ring_reduced_density_matrix(const MpsTensor& t, int length, int ell) {
  if (ell < 1 || ell > length) throw Error(ErrorKind::BadParam, "need 1 <= ell <= L");
  const int bond = t.bond_dim();
  const CMatrix env = complement_environment(t, length - ell);
  const std::size_t dim = checked_power(t.phys_dim(), ell, static_cast<std::size_t>(kSymmetrizeCap));
  const CMatrix boundary = boundary_of(t);
  std::vector<CMatrix> x = string_products(t, ell);
  for (auto& m : x) m = boundary * m;
  CMatrix rho(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t s = 0; s < dim; ++s) {
    // w[(a',b')] = sum_{a,b} X_s[a,b] env[(b,b'),(a,a')]
    CMatrix w = CMatrix::Zero(bond, bond);
    for (int a = 0; a < bond; ++a) {
      for (int b = 0; b < bond; ++b) {
        const cplx xs = x[s](a, b);
        if (xs == cplx(0.0)) continue;
        for (int ap = 0; ap < bond; ++ap) {
          for (int bp = 0; bp < bond; ++bp) w(ap, bp) += xs * env(b * bond + bp, a * bond + ap);
        }
      }
    }
    for (std::size_t sp = 0; sp < dim; ++sp) {
      rho(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(sp)) = x[sp].conjugate().cwiseProduct(w).sum();
    }
  }
  return finish(std::move(rho));
}

std::vector<double> ring_reduced_spectrum(const MpsTensor& t, int length, int ell, std::size_t cap) {
  if (ell < 1 || ell > length) throw Error(ErrorKind::BadParam, "need 1 <= ell <= L");
  const int bond = t.bond_dim();
  const int d2 = bond * bond;
  checked_power(t.phys_dim(), ell, cap);
  const CMatrix env = complement_environment(t, length - ell);
  const CMatrix boundary = boundary_of(t);
  // rho = Psi K Psi^dagger with Psi[s, (a,b)] = (B X_s)[a,b] and K[(a,b),(a',b')] = env[(b,b'),(a,a')];
  // its nonzero spectrum is that of G^{1/2} K G^{1/2} with the Gram matrix G = Psi^dagger Psi.
  CMatrix gram = CMatrix::Zero(d2, d2);
  for (const auto& x : string_products(t, ell)) {
    const CMatrix bx = boundary * x;
    const Eigen::Map<const CVector> col(bx.data(), d2);  // column-major: index a + b * bond
    gram += col.conjugate() * col.transpose();
  }
  CMatrix k(d2, d2);
  for (int a = 0; a < bond; ++a)
    for (int b = 0; b < bond; ++b)
      for (int ap = 0; ap < bond; ++ap)
        for (int bp = 0; bp < bond; ++bp) k(a + b * bond, ap + bp * bond) = env(b * bond + bp, a * bond + ap);
  Eigen::SelfAdjointEigenSolver<CMatrix> gram_eig(0.5 * (gram + gram.adjoint()));
  const RVector root = gram_eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CMatrix half = gram_eig.eigenvectors() * root.cast<cplx>().asDiagonal() * gram_eig.eigenvectors().adjoint();
  const CMatrix core = half * k * half;
  Eigen::SelfAdjointEigenSolver<CMatrix> core_eig(0.5 * (core + core.adjoint()), Eigen::EigenvaluesOnly);
  std::vector<double> spectrum(core_eig.eigenvalues().begin(), core_eig.eigenvalues().end());
  double total = 0.0;
  for (double v : spectrum) total += v;
  if (!(total > 0.0)) throw Error(ErrorKind::ZeroTensor, "reduced density matrix has zero trace");
  for (double& v : spectrum) v /= total;
  std::sort(spectrum.rbegin(), spectrum.rend());
  return spectrum;
}

DensityMatrix symmetrize_exact(const DensityMatrix& rho, std::span<const CMatrix> action) {
  if (action.empty()) throw Error(ErrorKind::BadParam, "empty group action");
  check_action(rho, action);
  CMatrix acc = CMatrix::Zero(rho.dim(), rho.dim());
  for (const auto& u : action) acc += u * rho.matrix * u.adjoint();
  acc /= static_cast<double>(action.size());
  acc = 0.5 * (acc + acc.adjoint()).eval();
  return DensityMatrix{std::move(acc)};
}

HaarSymmetrization symmetrize_haar_mc(const DensityMatrix& rho, const LieGroupRep& g, int samples,
                                      std::uint64_t seed) {
  if (samples < 2) throw Error(ErrorKind::BadParam, "Haar averaging needs at least 2 samples");
  check_action(rho, g.generators);
  std::vector<std::vector<double>> coords(static_cast<std::size_t>(samples));
  if (g.kind == LieKind::SU2) {
    const auto draws = haar_sample_su2(samples, seed);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      const auto c = draws[i].coordinates();
      coords[i].assign(c.begin(), c.end());
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (auto& c : coords) c = {angle(rng)};
  }
  const Eigen::Index dim = rho.dim();
  CMatrix sum = CMatrix::Zero(dim, dim);
  RMatrix sum_sq_re = RMatrix::Zero(dim, dim);
  RMatrix sum_sq_im = RMatrix::Zero(dim, dim);
  for (const auto& c : coords) {
    const CMatrix u = g.element(c);
    const CMatrix term = u * rho.matrix * u.adjoint();
    sum += term;
    sum_sq_re += term.real().cwiseAbs2();
    sum_sq_im += term.imag().cwiseAbs2();
  }
  const double n = samples;
  CMatrix mean = sum / n;
  const RMatrix var_re = (sum_sq_re / n - mean.real().cwiseAbs2()) * (n / (n - 1.0));
  const RMatrix var_im = (sum_sq_im / n - mean.imag().cwiseAbs2()) * (n / (n - 1.0));
  HaarSymmetrization out;
  out.std_err = ((var_re + var_im).cwiseMax(0.0) / n).cwiseSqrt();
  mean = 0.5 * (mean + mean.adjoint()).eval();
  out.commutant_defect = 0.0;
  for (const auto& x : g.generators) {
    out.commutant_defect = std::max(out.commutant_defect, (x * mean - mean * x).cwiseAbs().maxCoeff());
  }
  out.rho = DensityMatrix{std::move(mean)};
  return out;
}

DensityMatrix symmetrize_abelian_blocks(const DensityMatrix& rho, std::span<const CMatrix> projectors) {
  if (projectors.empty()) throw Error(ErrorKind::BadParam, "no sector projectors");
  check_action(rho, projectors);
  CMatrix acc = CMatrix::Zero(rho.dim(), rho.dim());
  for (const auto& p : projectors) acc += p * rho.matrix * p;
  acc = 0.5 * (acc + acc.adjoint()).eval();
  return DensityMatrix{std::move(acc)};
}

IsotypicDecomposition isotypic_decomposition(std::span<const CMatrix> action, std::uint64_t seed) {
  if (action.empty()) throw Error(ErrorKind::BadParam, "empty group action");
  if (action.front().rows() > kSymmetrizeCap) throw Error(ErrorKind::CapExceeded, "action dimension above 4096");
  ActionModel model{std::vector<CMatrix>(action.begin(), action.end()), true};
  return decompose(model, seed);
}

IsotypicDecomposition isotypic_decomposition(const LieGroupRep& g, std::uint64_t seed) {
  if (g.dim() > kNullSpaceCap) throw Error(ErrorKind::CapExceeded, "Lie decomposition is capped at dimension 64");
  ActionModel model{g.generators, false};
  return decompose(model, seed);
}

DensityMatrix symmetrize_nonabelian_basis(const DensityMatrix& rho, const IsotypicDecomposition& dec) {
  const Eigen::Index dim = rho.dim();
  CMatrix acc = CMatrix::Zero(dim, dim);
  Eigen::Index covered = 0;
  for (const auto& comp : dec.components) {
    const double norm = 1.0 / std::sqrt(static_cast<double>(comp.irrep_dim));
    covered += static_cast<Eigen::Index>(comp.irrep_dim) * comp.copies();
    for (const auto& qj : comp.copy_bases) {
      if (qj.rows() != dim) throw Error(ErrorKind::ShapeMismatch, "decomposition does not match rho");
      for (const auto& qk : comp.copy_bases) {
        const CMatrix basis = norm * qj * qk.adjoint();
        const cplx coeff = (basis.adjoint() * rho.matrix).trace();
        acc += coeff * basis;
      }
    }
  }
  if (covered != dim) throw Error(ErrorKind::DecompositionFailed, "decomposition does not span the space");
  acc = 0.5 * (acc + acc.adjoint()).eval();
  return DensityMatrix{std::move(acc)};
}

BlockStructureReport block_structure_check(const DensityMatrix& rho_tilde, const IsotypicDecomposition& dec,
                                           const DensityMatrix* rho, double tol) {
  BlockStructureReport report;
  auto fail = [](const std::string& what, double value) {
    std::ostringstream msg;
    msg << what << " (deviation " << value << ")";
    throw Error(ErrorKind::StructureViolation, msg.str());
  };
  const auto& comps = dec.components;
  for (std::size_t s = 0; s < comps.size(); ++s) {
    for (std::size_t sp = 0; sp < comps.size(); ++sp) {
      for (int j = 0; j < comps[s].copies(); ++j) {
        for (int jp = 0; jp < comps[sp].copies(); ++jp) {
          const CMatrix& q = comps[s].copy_bases[static_cast<std::size_t>(j)];
          const CMatrix& qp = comps[sp].copy_bases[static_cast<std::size_t>(jp)];
          const CMatrix block = q.adjoint() * rho_tilde.matrix * qp;
          std::ostringstream where;
          where << "block (irrep " << s << " copy " << j << ", irrep " << sp << " copy " << jp << ")";
          if (s != sp) {
            const double v = block.cwiseAbs().maxCoeff();
            report.max_cross_block = std::max(report.max_cross_block, v);
            if (v > tol) fail(where.str() + " connects distinct irreps", v);
            continue;
          }
          const cplx scalar = block.trace() / static_cast<double>(comps[s].irrep_dim);
          const CMatrix id = CMatrix::Identity(block.rows(), block.cols());
          const double dev = (block - scalar * id).cwiseAbs().maxCoeff();
          report.max_identity_deviation = std::max(report.max_identity_deviation, dev);
          if (dev > tol) fail(where.str() + " is not proportional to the identity", dev);
          if (rho != nullptr) {
            const cplx original = (q.adjoint() * rho->matrix * qp).trace();
            const double mismatch = std::abs(block.trace() - original);
            report.max_trace_mismatch = std::max(report.max_trace_mismatch, mismatch);
            if (mismatch > tol) fail(where.str() + " trace differs from the unsymmetrized state", mismatch);
          }
        }
      }
    }
  }
  return report;
}

double exact_renyi_moment(const DensityMatrix& rho, int n) {
  if (n < 1) throw Error(ErrorKind::BadParam, "Renyi index must be >= 1");
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(rho.matrix, Eigen::EigenvaluesOnly);
  double sum = 0.0;
  for (double lambda : solver.eigenvalues()) sum += std::pow(std::max(lambda, 0.0), n);
  return sum;
}

double exact_asymmetry(const DensityMatrix& rho, const DensityMatrix& rho_tilde, int n) {
  if (n < 2) throw Error(ErrorKind::BadParam, "replica index n must be >= 2");
  return std::log(exact_renyi_moment(rho_tilde, n) / exact_renyi_moment(rho, n)) / (1.0 - n);
}

cplx exact_charged_moment(const DensityMatrix& rho, std::span<const CMatrix> us) {
  if (us.empty()) throw Error(ErrorKind::BadParam, "no unitaries");
  check_action(rho, us);
  CMatrix acc = CMatrix::Identity(rho.dim(), rho.dim());
  for (const auto& u : us) acc = acc * rho.matrix * u;
  return acc.trace();
}

}  // namespace asymkit
