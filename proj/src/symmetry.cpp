#include "asymkit/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "asymkit/error.hpp"

namespace asymkit {

namespace {

constexpr double kIdentifyTol = 1e-8;

std::optional<std::size_t> find_element(const std::vector<CMatrix>& elements, const CMatrix& m) {
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (max_abs_diff(elements[i], m) < kIdentifyTol) return i;
  }
  return std::nullopt;
}

// Returns the index j with elements[j] == e^{i phi} m for some phi.
std::optional<std::size_t> find_up_to_phase(const std::vector<CMatrix>& elements, const CMatrix& m) {
  Eigen::Index r = 0, c = 0;
  m.cwiseAbs().maxCoeff(&r, &c);
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const cplx ref = elements[i](r, c);
    if (std::abs(ref) < 1e-12) continue;
    const cplx phase = ref / m(r, c);
    if (std::abs(std::abs(phase) - 1.0) > kIdentifyTol) continue;
    if (max_abs_diff(elements[i], phase * m) < kIdentifyTol) return i;
  }
  return std::nullopt;
}

FiniteGroupRep tabulate(std::vector<CMatrix> elements, bool projective) {
  FiniteGroupRep g;
  g.elements = std::move(elements);
  g.projective = projective;
  const std::size_t n = g.elements.size();
  auto lookup = [&](const CMatrix& m) {
    auto idx = projective ? find_up_to_phase(g.elements, m) : find_element(g.elements, m);
    if (!idx) throw Error(ErrorKind::ClosureViolation, "product left the element list while tabulating");
    return *idx;
  };
  g.cayley.assign(n, std::vector<std::size_t>(n));
  g.inverse.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g.cayley[i][j] = lookup(g.elements[i] * g.elements[j]);
    g.inverse[i] = lookup(g.elements[i].adjoint());
  }
  return g;
}

}  // namespace

bool FiniteGroupRep::is_abelian() const {
  for (std::size_t i = 0; i < order(); ++i) {
    for (std::size_t j = i + 1; j < order(); ++j) {
      if (cayley[i][j] != cayley[j][i]) return false;
    }
  }
  return true;
}

FiniteGroupRep generate_group(std::span<const CMatrix> generators, std::size_t max_order) {
  if (generators.empty()) throw Error(ErrorKind::BadParam, "generate_group needs at least one generator");
  const auto dim = generators.front().rows();
  for (const auto& u : generators) {
    if (u.rows() != dim || u.cols() != dim) throw Error(ErrorKind::ShapeMismatch, "generators differ in size");
    if (!is_unitary(u, 1e-10)) throw Error(ErrorKind::NonUnitary, "group generator is not unitary");
  }
  std::vector<CMatrix> elements{CMatrix::Identity(dim, dim)};
  for (std::size_t frontier = 0; frontier < elements.size(); ++frontier) {
    for (const auto& u : generators) {
      CMatrix product = elements[frontier] * u;
      if (find_element(elements, product)) continue;
      if (elements.size() >= max_order) {
        std::ostringstream msg;
        msg << "closure exceeded " << max_order << " elements (infinite group or numerical drift)";
        throw Error(ErrorKind::OrderExceeded, msg.str());
      }
      elements.push_back(std::move(product));
    }
  }
  return tabulate(std::move(elements), false);
}

FiniteGroupRep quotient_global_phase(const FiniteGroupRep& g) {
  std::vector<CMatrix> reps;
  for (const auto& e : g.elements) {
    if (!find_up_to_phase(reps, e)) reps.push_back(e);
  }
  return tabulate(std::move(reps), true);
}

std::vector<CMatrix> site_action(const FiniteGroupRep& g, int sites) {
  std::vector<CMatrix> out;
  out.reserve(g.order());
  for (const auto& u : g.elements) out.push_back(kron_power(u, sites));
  return out;
}

SubgroupInfo detect_invariant_subgroup(const MpsTensor& t, const FiniteGroupRep& g, double tol) {
  SubgroupInfo info;
  for (std::size_t i = 0; i < g.order(); ++i) {
    const auto r = build_charged_transfer(t, g.elements[i], i);
    const auto& lead = r.leading_pairs().front();
    if (std::abs(lead.value) >= 1.0 - tol) {
      info.elements.push_back(i);
      info.phases.push_back(std::arg(lead.value));
    }
  }
  auto member = [&](std::size_t k) {
    return std::binary_search(info.elements.begin(), info.elements.end(), k);
  };
  for (auto i : info.elements) {
    if (!member(g.inverse[i])) {
      throw Error(ErrorKind::ClosureViolation, "detected invariant set is not closed under inverses");
    }
    for (auto j : info.elements) {
      if (!member(g.cayley[i][j])) {
        throw Error(ErrorKind::ClosureViolation, "detected invariant set is not closed under products");
      }
    }
  }
  return info;
}

CMatrix LieGroupRep::element(std::span<const double> coords) const {
  if (static_cast<int>(coords.size()) != dim_g()) {
    throw Error(ErrorKind::ShapeMismatch, "coordinate count must equal dim g");
  }
  CMatrix x = CMatrix::Zero(dim(), dim());
  for (int a = 0; a < dim_g(); ++a) x += coords[static_cast<std::size_t>(a)] * generators[static_cast<std::size_t>(a)];
  return expm_antihermitian(x);
}

LieGroupRep make_lie_group(LieKind kind, std::vector<CMatrix> generators, QuadratureSpec quadrature) {
  const std::size_t expected = kind == LieKind::U1 ? 1 : 3;
  if (generators.size() != expected) {
    throw Error(ErrorKind::BadParam, kind == LieKind::U1 ? "U(1) takes exactly one generator"
                                                           : "SU(2) takes exactly three generators");
  }
  const auto dim = generators.front().rows();
  for (const auto& x : generators) {
    if (x.rows() != dim || x.cols() != dim) throw Error(ErrorKind::ShapeMismatch, "generators differ in size");
    require_finite(x, "Lie generator");
    if (max_abs_diff(x.adjoint(), -x) > 1e-9) throw Error(ErrorKind::BadParam, "Lie generator must be anti-Hermitian");
  }
  if (kind == LieKind::U1) {
    const CMatrix charge = cplx(0.0, -1.0) * generators.front();
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (charge + charge.adjoint()));
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
      const double q = solver.eigenvalues()[i];
      if (std::abs(q - std::round(q)) > 1e-9) {
        throw Error(ErrorKind::BadParam, "U(1) generator must have integer charges so the period is 2 pi");
      }
    }
  } else {
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3;
      const int c = (a + 2) % 3;
      const CMatrix comm = generators[a] * generators[b] - generators[b] * generators[a];
      if (max_abs_diff(comm, generators[c]) > 1e-9) {
        throw Error(ErrorKind::BadParam, "SU(2) generators violate [X_a, X_b] = eps_abc X_c");
      }
    }
  }
  if (quadrature.nodes < 2) throw Error(ErrorKind::BadParam, "quadrature needs at least 2 nodes");
  if (quadrature.samples < 1 || quadrature.batches < 2 || quadrature.samples < quadrature.batches) {
    throw Error(ErrorKind::BadParam, "Monte Carlo needs samples >= batches >= 2");
  }
  return LieGroupRep{kind, std::move(generators), quadrature};
}

LieGroupRep tensor_power(const LieGroupRep& g, int sites) {
  if (sites < 1) throw Error(ErrorKind::BadParam, "tensor_power needs sites >= 1");
  LieGroupRep out = g;
  const auto d = g.dim();
  for (auto& x : out.generators) {
    const CMatrix single = x;
    CMatrix total = CMatrix::Zero(static_cast<Eigen::Index>(std::pow(d, sites)), static_cast<Eigen::Index>(std::pow(d, sites)));
    for (int k = 0; k < sites; ++k) {
      CMatrix term = CMatrix::Identity(1, 1);
      for (int j = 0; j < sites; ++j) term = kron(term, j == k ? single : CMatrix::Identity(d, d));
      total += term;
    }
    x = std::move(total);
  }
  return out;
}

SubalgebraInfo detect_invariant_subalgebra(const MpsTensor& t, const LieGroupRep& g, double step, double threshold) {
  const int n = g.dim_g();
  auto coefficient = [&](const RVector& direction) {
    std::vector<double> coords(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) coords[static_cast<std::size_t>(a)] = step * direction[a];
    const double rho = spectral_radius(build_charged_transfer(t, g.element(coords)));
    return (1.0 - rho) / (step * step);
  };
  SubalgebraInfo info;
  info.quadratic_form = RMatrix::Zero(n, n);
  RVector diag(n);
  for (int a = 0; a < n; ++a) diag[a] = coefficient(RVector::Unit(n, a));
  for (int a = 0; a < n; ++a) {
    info.quadratic_form(a, a) = diag[a];
    for (int b = a + 1; b < n; ++b) {
      const double pair = coefficient(RVector::Unit(n, a) + RVector::Unit(n, b));
      info.quadratic_form(a, b) = info.quadratic_form(b, a) = 0.5 * (pair - diag[a] - diag[b]);
    }
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> solver(info.quadratic_form);
  std::vector<int> null_cols, coset_cols;
  for (int k = 0; k < n; ++k) {
    (std::abs(solver.eigenvalues()[k]) < threshold ? null_cols : coset_cols).push_back(k);
  }
  info.dim_h = static_cast<int>(null_cols.size());
  info.h_basis = RMatrix(n, info.dim_h);
  info.coset_basis = RMatrix(n, static_cast<Eigen::Index>(coset_cols.size()));
  for (std::size_t k = 0; k < null_cols.size(); ++k) info.h_basis.col(static_cast<Eigen::Index>(k)) = solver.eigenvectors().col(null_cols[k]);
  for (std::size_t k = 0; k < coset_cols.size(); ++k) info.coset_basis.col(static_cast<Eigen::Index>(k)) = solver.eigenvectors().col(coset_cols[k]);
  return info;
}

std::vector<QuadNode> haar_nodes_u1(int nodes) {
  if (nodes < 2) throw Error(ErrorKind::BadParam, "U(1) quadrature needs K >= 2");
  std::vector<QuadNode> out;
  out.reserve(static_cast<std::size_t>(nodes));
  for (int k = 0; k < nodes; ++k) out.push_back({2.0 * std::numbers::pi * k / nodes, 1.0 / nodes});
  return out;
}

Eigen::Matrix2cd Su2Sample::fundamental() const {
  Eigen::Matrix2cd g;
  g << cplx(w, -z), cplx(-y, -x),
       cplx(y, -x), cplx(w, z);
  return g;
}

std::array<double, 3> Su2Sample::coordinates() const {
  const double s = std::sqrt(x * x + y * y + z * z);
  if (s < 1e-300) {
    return w > 0.0 ? std::array<double, 3>{0.0, 0.0, 0.0} : std::array<double, 3>{0.0, 0.0, 2.0 * std::numbers::pi};
  }
  const double angle = 2.0 * std::atan2(s, w);
  return {angle * x / s, angle * y / s, angle * z / s};
}

std::vector<Su2Sample> haar_sample_su2(int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorKind::BadParam, "need at least one sample");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<Su2Sample> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  while (static_cast<int>(out.size()) < n_samples) {
    const double w = gauss(rng), x = gauss(rng), y = gauss(rng), z = gauss(rng);
    const double norm = std::sqrt(w * w + x * x + y * y + z * z);
    if (norm < 1e-12) continue;
    out.push_back({w / norm, x / norm, y / norm, z / norm});
  }
  return out;
}

std::vector<CMatrix> abelian_irrep_projectors(const FiniteGroupRep& g, std::span<const CMatrix> action) {
  if (!g.is_abelian()) throw Error(ErrorKind::NonAbelian, "character projectors need an abelian group");
  if (action.size() != g.order()) throw Error(ErrorKind::ShapeMismatch, "one action matrix per element required");
  const auto dim = action.front().rows();
  // A generic combination of commuting unitaries is normal; its eigenspaces are the joint
  // eigenspaces, i.e. the character sectors.
  std::mt19937_64 rng(0xab1e);
  std::normal_distribution<double> gauss;
  CMatrix combo = CMatrix::Zero(dim, dim);
  for (const auto& u : action) combo += cplx(gauss(rng), gauss(rng)) * u;
  Eigen::ComplexEigenSolver<CMatrix> solver(combo);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "eigensolver failed");

  std::vector<std::vector<cplx>> characters;
  std::vector<CMatrix> projectors;
  const double scale = std::max(1.0, combo.norm());
  for (Eigen::Index k = 0; k < dim; ++k) {
    const CVector v = solver.eigenvectors().col(k).normalized();
    std::vector<cplx> chi(g.order());
    for (std::size_t e = 0; e < g.order(); ++e) chi[e] = v.dot(action[e] * v);
    const bool seen = std::any_of(characters.begin(), characters.end(), [&](const auto& other) {
      for (std::size_t e = 0; e < chi.size(); ++e) {
        if (std::abs(other[e] - chi[e]) > 1e-6 * scale) return false;
      }
      return true;
    });
    if (seen) continue;
    // Orthogonality of characters: P_sigma = |G|^{-1} sum_g conj(chi_sigma(g)) U_g.
    CMatrix p = CMatrix::Zero(dim, dim);
    for (std::size_t e = 0; e < g.order(); ++e) {
      const cplx exact = std::polar(1.0, std::arg(chi[e]));
      chi[e] = exact;
      p += std::conj(exact) * action[e];
    }
    p /= static_cast<double>(g.order());
    characters.push_back(std::move(chi));
    projectors.push_back(std::move(p));
  }
  return projectors;
}

CMatrix pauli_x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMatrix pauli_y() {
  CMatrix m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

CMatrix pauli_z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

std::array<CMatrix, 3> spin_matrices(double spin) {
  const int dim = static_cast<int>(std::lround(2.0 * spin)) + 1;
  if (dim < 2 || std::abs(2.0 * spin - (dim - 1)) > 1e-12) throw Error(ErrorKind::BadParam, "spin must be a positive half-integer");
  CMatrix raise = CMatrix::Zero(dim, dim);
  CMatrix sz = CMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const double m = spin - k;
    sz(k, k) = m;
    if (k > 0) raise(k - 1, k) = std::sqrt(spin * (spin + 1) - m * (m + 1));
  }
  const CMatrix lower = raise.adjoint();
  return {0.5 * (raise + lower), cplx(0.0, -0.5) * (raise - lower), sz};
}

CMatrix y_rotation(double theta, double spin) {
  const auto s = spin_matrices(spin);
  return expm_antihermitian(cplx(0.0, -theta) * s[1]);
}

std::vector<CMatrix> su2_generators(double spin) {
  const auto s = spin_matrices(spin);
  return {cplx(0.0, -1.0) * s[0], cplx(0.0, -1.0) * s[1], cplx(0.0, -1.0) * s[2]};
}

}  // namespace asymkit
