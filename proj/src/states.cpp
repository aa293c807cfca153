#include "asymkit/states.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/SVD>

#include "asymkit/error.hpp"
#include "asymkit/symmetry.hpp"

namespace asymkit {

namespace {

CMatrix scalar_matrix(cplx v) { return CMatrix::Constant(1, 1, v); }

// sum_{s,s'} M_s (x) conj(M_{s'}) O_{s's}
CMatrix operator_transfer(const MpsTensor& t, const CMatrix& op) {
  const int bond = t.bond_dim();
  CMatrix r = CMatrix::Zero(bond * bond, bond * bond);
  for (int s = 0; s < t.phys_dim(); ++s) {
    CMatrix n = CMatrix::Zero(bond, bond);
    for (int sp = 0; sp < t.phys_dim(); ++sp) n += std::conj(op(sp, s)) * t[sp];
    r += kron(t[s], n.conjugate());
  }
  return r;
}

struct SiteTensor {
  std::vector<CMatrix> gamma;  // one D_left x D_right matrix per spin state
};

// Vidal-form two-site update on the bond (left, middle, right) with outer weights `outer`.
// Returns the discarded weight.
double apply_bond(SiteTensor& left, RVector& middle, SiteTensor& right, const RVector& outer, const CMatrix& gate,
                  int bond_cap) {
  const Eigen::Index dl = outer.size();
  const Eigen::Index dr = outer.size();
  CMatrix theta = CMatrix::Zero(2 * dl, 2 * dr);
  for (int s1 = 0; s1 < 2; ++s1) {
    for (int s2 = 0; s2 < 2; ++s2) {
      theta.block(s1 * dl, s2 * dr, dl, dr) = outer.asDiagonal() * left.gamma[s1] * middle.asDiagonal() *
                                              right.gamma[s2] * outer.asDiagonal();
    }
  }
  CMatrix gated = CMatrix::Zero(2 * dl, 2 * dr);
  for (int t1 = 0; t1 < 2; ++t1) {
    for (int t2 = 0; t2 < 2; ++t2) {
      for (int s1 = 0; s1 < 2; ++s1) {
        for (int s2 = 0; s2 < 2; ++s2) {
          const cplx w = gate(t1 * 2 + t2, s1 * 2 + s2);
          if (w == cplx(0.0)) continue;
          gated.block(t1 * dl, t2 * dr, dl, dr) += w * theta.block(s1 * dl, s2 * dr, dl, dr);
        }
      }
    }
  }
  Eigen::BDCSVD<CMatrix> svd(gated, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[0] > 0.0)) throw Error(ErrorKind::ZeroTensor, "TEBD update annihilated the state");
  Eigen::Index keep = 0;
  while (keep < sv.size() && keep < bond_cap && sv[keep] > 1e-8 * sv[0]) ++keep;
  const double total = sv.squaredNorm();
  const double kept = sv.head(keep).squaredNorm();
  middle = sv.head(keep) / std::sqrt(kept);
  const RVector inv_outer = outer.cwiseInverse();
  const CMatrix u = svd.matrixU().leftCols(keep);
  const CMatrix vh = svd.matrixV().leftCols(keep).adjoint();
  for (int s = 0; s < 2; ++s) {
    left.gamma[s] = inv_outer.asDiagonal() * u.middleRows(s * dl, dl);
    right.gamma[s] = vh.middleCols(s * dr, dr) * inv_outer.asDiagonal();
  }
  return (total - kept) / total;
}

// <theta|h|theta>/<theta|theta> for one bond; exact in canonical form.
double bond_energy(const SiteTensor& left, const RVector& middle, const SiteTensor& right, const RVector& outer,
                   const CMatrix& h) {
  std::vector<CMatrix> theta(4);
  for (int s1 = 0; s1 < 2; ++s1) {
    for (int s2 = 0; s2 < 2; ++s2) {
      theta[s1 * 2 + s2] = outer.asDiagonal() * left.gamma[s1] * middle.asDiagonal() * right.gamma[s2] *
                           outer.asDiagonal();
    }
  }
  cplx num = 0.0;
  double norm = 0.0;
  for (int a = 0; a < 4; ++a) {
    norm += theta[a].squaredNorm();
    for (int b = 0; b < 4; ++b) {
      if (h(a, b) == cplx(0.0)) continue;
      num += h(a, b) * (theta[a].conjugate().cwiseProduct(theta[b])).sum();
    }
  }
  return num.real() / norm;
}

CMatrix bond_gate(const CMatrix& h, double tau) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
  const RVector w = (-tau * solver.eigenvalues().array()).exp();
  return solver.eigenvectors() * w.asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace

MpsTensor ferromagnet(bool spin_down) {
  std::vector<CMatrix> mats{scalar_matrix(spin_down ? 0.0 : 1.0), scalar_matrix(spin_down ? 1.0 : 0.0)};
  return MpsTensor(std::move(mats));
}

MpsTensor tilted_product(double theta) {
  if (!std::isfinite(theta)) throw Error(ErrorKind::BadParam, "theta must be finite");
  std::vector<CMatrix> mats{scalar_matrix(std::cos(theta / 2)), scalar_matrix(std::sin(theta / 2))};
  return MpsTensor(std::move(mats));
}

MpsTensor neel() {
  std::vector<CMatrix> mats(4, scalar_matrix(0.0));
  mats[1] = scalar_matrix(1.0);  // |up down>
  return MpsTensor(std::move(mats));
}

MpsTensor ghz(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::BadParam, "GHZ weight p must lie in [0, 1]");
  if (p == 1.0) return ferromagnet(false);
  if (p == 0.0) return ferromagnet(true);
  CMatrix up = CMatrix::Zero(2, 2);
  CMatrix down = CMatrix::Zero(2, 2);
  up(0, 0) = 1.0;
  down(1, 1) = 1.0;
  CMatrix boundary = CMatrix::Zero(2, 2);
  boundary(0, 0) = std::sqrt(p);
  boundary(1, 1) = std::sqrt(1.0 - p);
  return MpsTensor({up, down}).with_boundary(boundary);
}

MpsTensor aklt() {
  const double a = std::sqrt(2.0 / 3.0);
  const double b = std::sqrt(1.0 / 3.0);
  CMatrix plus = CMatrix::Zero(2, 2);
  CMatrix zero = CMatrix::Zero(2, 2);
  CMatrix minus = CMatrix::Zero(2, 2);
  plus(0, 1) = a;
  zero(0, 0) = -b;
  zero(1, 1) = b;
  minus(1, 0) = -a;
  return normalize(MpsTensor({plus, zero, minus}));
}

MpsTensor random_mps(int phys_dim, int bond_dim, std::uint64_t seed) {
  if (phys_dim < 1 || bond_dim < 1) throw Error(ErrorKind::BadParam, "random tensor needs d, D >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<CMatrix> mats(static_cast<std::size_t>(phys_dim), CMatrix(bond_dim, bond_dim));
  for (auto& m : mats) {
    for (int a = 0; a < bond_dim; ++a) {
      for (int b = 0; b < bond_dim; ++b) {
        const double re = normal(rng);
        const double im = normal(rng);
        m(a, b) = cplx(re, im);
      }
    }
  }
  return normalize(MpsTensor(std::move(mats)));
}

MpsTensor catalog(CatalogState state, const CatalogParams& params) {
  switch (state) {
    case CatalogState::Ferromagnet:
      return ferromagnet(params.spin_down);
    case CatalogState::TiltedProduct:
      return tilted_product(params.theta);
    case CatalogState::Neel:
      return neel();
    case CatalogState::Ghz:
      return ghz(params.p);
    case CatalogState::Aklt:
      return aklt();
    case CatalogState::Random:
      return random_mps(params.phys_dim, params.bond_dim, params.seed);
  }
  throw Error(ErrorKind::BadParam, "unknown catalog state");
}

CMatrix xxz_bond_hamiltonian(double delta) {
  return kron(pauli_x(), pauli_x()) + kron(pauli_y(), pauli_y()) + delta * kron(pauli_z(), pauli_z());
}

double xxz_energy_density(const MpsTensor& blocked, double delta) {
  if (blocked.phys_dim() != 4) throw Error(ErrorKind::ShapeMismatch, "expected a two-site blocked tensor (d = 4)");
  const MpsTensor t = normalize(blocked);
  const auto fixed = fixed_point_projector(build_transfer_operator(t));
  const CMatrix h = xxz_bond_hamiltonian(delta);
  const cplx norm = fixed.left.transpose() * fixed.right;
  const cplx inner = fixed.left.transpose() * operator_transfer(t, h) * fixed.right;
  const CMatrix id2 = CMatrix::Identity(2, 2);
  const CMatrix across = kron(kron(id2, h), id2);
  const cplx outer = fixed.left.transpose() * operator_transfer(block_sites(t, 2), across) * fixed.right;
  return 0.5 * ((inner + outer) / norm).real();
}

XxzResult xxz_ground_state(const XxzSpec& spec, PhaseHint hint) {
  if (!std::isfinite(spec.delta)) throw Error(ErrorKind::BadParam, "delta must be finite");
  if (std::abs(spec.delta) <= 1.0) {
    throw Error(ErrorKind::CriticalRegime, "|delta| <= 1 is the gapless regime; only gapped phases are supported");
  }
  if (spec.bond_dim < 2) throw Error(ErrorKind::BadParam, "bond dimension cap must be >= 2");
  if (spec.unit_cell != 2) throw Error(ErrorKind::BadParam, "only a two-site unit cell is supported");
  if (spec.schedule.empty()) throw Error(ErrorKind::BadParam, "empty Trotter schedule");
  for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
    if (!(spec.schedule[i].dtau > 0.0) || spec.schedule[i].max_steps < 1) {
      throw Error(ErrorKind::BadParam, "Trotter stages need dtau > 0 and max_steps >= 1");
    }
    if (i > 0 && !(spec.schedule[i].dtau < spec.schedule[i - 1].dtau)) {
      throw Error(ErrorKind::BadParam, "Trotter steps must be strictly decreasing");
    }
  }

  SiteTensor a{{scalar_matrix(1.0), scalar_matrix(0.0)}};
  SiteTensor b = hint == PhaseHint::Antiferro ? SiteTensor{{scalar_matrix(0.0), scalar_matrix(1.0)}} : a;
  RVector lam_a = RVector::Ones(1);  // between A and B
  RVector lam_b = RVector::Ones(1);  // between B and the next A

  const CMatrix h = xxz_bond_hamiltonian(spec.delta);
  XxzResult result{ferromagnet(), 0.0, 0.0, {}};
  int sweep = 0;
  bool converged = false;
  for (const auto& stage : spec.schedule) {
    const CMatrix half = bond_gate(h, 0.5 * stage.dtau);
    const CMatrix full = bond_gate(h, stage.dtau);
    double previous = std::numeric_limits<double>::infinity();
    converged = false;
    double stage_trunc = 0.0;
    for (int step = 0; step < stage.max_steps; ++step) {
      double trunc = apply_bond(a, lam_a, b, lam_b, half, spec.bond_dim);
      trunc = std::max(trunc, apply_bond(b, lam_b, a, lam_a, full, spec.bond_dim));
      trunc = std::max(trunc, apply_bond(a, lam_a, b, lam_b, half, spec.bond_dim));
      stage_trunc = std::max(stage_trunc, trunc);
      const double energy =
          0.5 * (bond_energy(a, lam_a, b, lam_b, h) + bond_energy(b, lam_b, a, lam_a, h));
      ++sweep;
      result.log.push_back({sweep, stage.dtau, energy, trunc});
      if (std::abs(energy - previous) < spec.energy_tol) {
        converged = true;
        break;
      }
      previous = energy;
    }
    result.truncation_weight = stage_trunc;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "imaginary-time evolution did not reach energy_tol " << spec.energy_tol << " in the final stage";
    throw Error(ErrorKind::NonConvergence, msg.str());
  }

  std::vector<CMatrix> blocked;
  for (int s1 = 0; s1 < 2; ++s1) {
    for (int s2 = 0; s2 < 2; ++s2) {
      blocked.push_back(a.gamma[s1] * lam_a.asDiagonal() * b.gamma[s2] * lam_b.asDiagonal());
    }
  }
  result.tensor = normalize(MpsTensor(std::move(blocked)));
  const auto report = clustering_check(result.tensor);
  if (!report.is_clustering) {
    throw Error(ErrorKind::NonClustering,
                "TEBD state is not clustering (symmetric superposition); re-seed from a polarized product state");
  }
  result.energy_density = xxz_energy_density(result.tensor, spec.delta);
  return result;
}

}  // namespace asymkit
