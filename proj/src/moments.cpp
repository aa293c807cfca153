#include "asymkit/moments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "asymkit/error.hpp"

namespace asymkit {

namespace {

constexpr double kUnderflow = 1e-300;

// Runs body(i) for i in [0, count) on `threads` OpenMP threads; the first exception is rethrown.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  std::exception_ptr failure;
  std::mutex guard;
  const long long total = static_cast<long long>(count);
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1))
  for (long long i = 0; i < total; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// T[(c',e'),(c'',e'')] = sum_{c,e} A[(c,c'),(e,e')] l[c,c''] r[e,e''], O(D^5).
CMatrix rank_one_factor(const CMatrix& a, const CMatrix& lmat, const CMatrix& rmat, int bond) {
  const int d2 = bond * bond;
  CMatrix t = CMatrix::Zero(d2, d2);
  CVector row(d2);
  for (int c = 0; c < bond; ++c) {
    for (int cp = 0; cp < bond; ++cp) {
      row = a.row(c * bond + cp).transpose();
      // column-major map: wt(e', e) = A[(c,c'),(e,e')]
      const Eigen::Map<const CMatrix> wt(row.data(), bond, bond);
      const CMatrix z = wt * rmat;
      for (int cpp = 0; cpp < bond; ++cpp) {
        const cplx weight = lmat(c, cpp);
        if (weight == cplx(0.0)) continue;
        t.block(cp * bond, cpp * bond, bond, bond) += weight * z;
      }
    }
  }
  return t;
}

// T[(c',e'),(c'',e'')] = sum_{c,e} A[(c,c'),(e,e')] E[(e,e''),(c,c'')], as one GEMM.
CMatrix environment_factor(const CMatrix& a, const CMatrix& env, int bond) {
  const int d2 = bond * bond;
  CMatrix x(d2, d2);
  CMatrix y(d2, d2);
  for (int c = 0; c < bond; ++c) {
    for (int cp = 0; cp < bond; ++cp) {
      for (int e = 0; e < bond; ++e) {
        for (int ep = 0; ep < bond; ++ep) {
          x(cp * bond + ep, c * bond + e) = a(c * bond + cp, e * bond + ep);
          y(c * bond + e, cp * bond + ep) = env(e * bond + ep, c * bond + cp);
        }
      }
    }
  }
  return x * y;
}

void check_blocks(std::span<const CMatrix> blocks, int bond) {
  if (blocks.empty()) throw Error(ErrorKind::ShapeMismatch, "need at least one replica block");
  const int d2 = bond * bond;
  for (const auto& b : blocks) {
    if (b.rows() != d2 || b.cols() != d2) throw Error(ErrorKind::ShapeMismatch, "replica blocks must be D^2 x D^2");
  }
}

void check_product_identity(std::span<const CMatrix> us) {
  if (us.size() < 2) throw Error(ErrorKind::BadParam, "charged moments need n >= 2 unitaries");
  CMatrix prod = CMatrix::Identity(us.front().rows(), us.front().cols());
  for (const auto& u : us) {
    if (u.rows() != prod.rows() || u.cols() != prod.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "all unitaries must share one dimension");
    }
    prod = prod * u;
  }
  const double dev = max_abs_diff(prod, CMatrix::Identity(prod.rows(), prod.cols()));
  if (dev > 1e-8) {
    std::ostringstream msg;
    msg << "product of the unitaries deviates from the identity by " << dev;
    throw Error(ErrorKind::ProductNotIdentity, msg.str());
  }
}

void check_replicas(int n) {
  if (n < 2) throw Error(ErrorKind::BadParam, "replica index n must be >= 2");
}

std::vector<int> checked_grid(std::span<const int> ell_grid) {
  std::vector<int> grid(ell_grid.begin(), ell_grid.end());
  for (int ell : grid) {
    if (ell < 1) throw Error(ErrorKind::BadParam, "subsystem lengths must be >= 1");
  }
  return grid;
}

double assemble_delta_s(double mean_f, int n) {
  if (!(mean_f > 0.0) || !std::isfinite(mean_f)) {
    std::ostringstream msg;
    msg << "group-averaged moment ratio is " << mean_f << "; cannot take its logarithm";
    throw Error(ErrorKind::NonFinite, msg.str());
  }
  return std::log(mean_f) / (1.0 - n);
}

double moment_ratio(cplx value, double trn) {
  if (std::abs(value) < kUnderflow) return 0.0;
  return value.real() / trn;
}

// Tr(rho_A^n) at every ell, through the ring factor of R^ell.
double identity_moment(const MomentEvaluator& ev, int n, const CMatrix& power, int ell) {
  const CMatrix factor = ev.ring_factor(power, ell);
  std::vector<const CMatrix*> ptrs(static_cast<std::size_t>(n), &factor);
  return MomentEvaluator::close_ring(ptrs).real();
}

}  // namespace

CMatrix Permutation::dense_matrix(int bond_dim) const {
  if (n_replicas < 1) throw Error(ErrorKind::BadParam, "permutation needs n >= 1");
  const long long d2 = static_cast<long long>(bond_dim) * bond_dim;
  long long dim = 1;
  for (int j = 0; j < n_replicas; ++j) dim *= d2;
  if (dim > 1 << 14) throw Error(ErrorKind::CapExceeded, "dense permutation matrix too large");
  CMatrix p = CMatrix::Zero(dim, dim);
  std::vector<int> ket(static_cast<std::size_t>(n_replicas));
  std::vector<int> bra(static_cast<std::size_t>(n_replicas));
  for (long long nat = 0; nat < dim; ++nat) {
    long long rest = nat;
    for (int j = n_replicas - 1; j >= 0; --j) {
      bra[static_cast<std::size_t>(j)] = static_cast<int>(rest % bond_dim);
      rest /= bond_dim;
      ket[static_cast<std::size_t>(j)] = static_cast<int>(rest % bond_dim);
      rest /= bond_dim;
    }
    // slot target(j) receives the bra index of replica j next to its own ket index
    long long slot = 0;
    for (int k = 0; k < n_replicas; ++k) {
      const int source = (k + n_replicas - 1) % n_replicas;
      slot = slot * d2 + ket[static_cast<std::size_t>(k)] * bond_dim + bra[static_cast<std::size_t>(source)];
    }
    p(slot, nat) = 1.0;
  }
  return p;
}

cplx rank_one_contraction(std::span<const CMatrix> blocks, const CVector& left, const CVector& right, int bond_dim) {
  check_blocks(blocks, bond_dim);
  const CMatrix lmat = as_bond_matrix(left, bond_dim);
  const CMatrix rmat = as_bond_matrix(right, bond_dim);
  std::vector<CMatrix> factors;
  factors.reserve(blocks.size());
  for (const auto& b : blocks) factors.push_back(rank_one_factor(b, lmat, rmat, bond_dim));
  std::vector<const CMatrix*> ptrs;
  for (const auto& f : factors) ptrs.push_back(&f);
  return MomentEvaluator::close_ring(ptrs);
}

cplx ring_contraction(std::span<const CMatrix> blocks, const CMatrix& environment, int bond_dim) {
  check_blocks(blocks, bond_dim);
  if (environment.rows() != bond_dim * bond_dim || environment.cols() != environment.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "environment must be D^2 x D^2");
  }
  std::vector<CMatrix> factors;
  factors.reserve(blocks.size());
  for (const auto& b : blocks) factors.push_back(environment_factor(b, environment, bond_dim));
  std::vector<const CMatrix*> ptrs;
  for (const auto& f : factors) ptrs.push_back(&f);
  return MomentEvaluator::close_ring(ptrs);
}

MomentEvaluator::MomentEvaluator(const MpsTensor& t, VolumeMode mode, double clustering_tol)
    : tensor_(normalize(t)), mode_(mode), plain_(build_transfer_operator(tensor_)) {
  if (mode_.is_infinite()) {
    const auto report = clustering_check(tensor_, clustering_tol);
    if (!report.is_clustering) {
      std::ostringstream msg;
      msg << "state is not clustering (|lambda_2/lambda_1| = " << report.gap_ratio
          << "); the transfer operator has no unique fixed point, so the infinite-volume "
             "moments do not reduce to a rank-one projector. Superpositions of macroscopically "
             "distinct states such as GHZ(p) with 0 < p < 1 land here; use the finite-chain oracle.";
      throw Error(ErrorKind::NonClustering, msg.str());
    }
    fixed_point_ = fixed_point_projector(plain_, clustering_tol);
    left_ = as_bond_matrix(fixed_point_.left, bond_dim());
    right_ = as_bond_matrix(fixed_point_.right, bond_dim());
  } else {
    const int length = *mode_.ring_length;
    if (length < 1) throw Error(ErrorKind::BadParam, "ring length must be >= 1");
    ring_norm_ = matrix_power(plain_.matrix(), static_cast<unsigned long long>(length)).trace();
    if (std::abs(ring_norm_) < kUnderflow) throw Error(ErrorKind::ZeroTensor, "state norm vanishes on this ring");
  }
}

CMatrix MomentEvaluator::ring_factor(const CMatrix& block, int ell) const {
  const int bond = bond_dim();
  if (mode_.is_infinite()) {
    CMatrix factor = rank_one_factor(block, left_, right_, bond);
    // lambda_1 == 1 up to rounding after normalize(); divide it out exactly
    factor /= std::pow(fixed_point_.value, ell);
    return factor;
  }
  const int length = *mode_.ring_length;
  if (ell > length) throw Error(ErrorKind::BadParam, "subsystem longer than the ring");
  const CMatrix env = matrix_power(plain_.matrix(), static_cast<unsigned long long>(length - ell));
  CMatrix factor = environment_factor(block, env, bond);
  factor /= ring_norm_;
  return factor;
}

cplx MomentEvaluator::close_ring(std::span<const CMatrix* const> factors) {
  if (factors.empty()) throw Error(ErrorKind::BadParam, "empty ring");
  if (factors.size() == 1) return factors.front()->trace();
  if (factors.size() == 2) return factors[0]->transpose().cwiseProduct(*factors[1]).sum();
  CMatrix acc = *factors[0];
  for (std::size_t j = 1; j + 1 < factors.size(); ++j) acc = acc * *factors[j];
  return acc.transpose().cwiseProduct(*factors.back()).sum();
}

cplx MomentEvaluator::contract(std::span<const CMatrix> blocks, int ell) const {
  check_blocks(blocks, bond_dim());
  std::vector<CMatrix> factors;
  factors.reserve(blocks.size());
  for (const auto& b : blocks) factors.push_back(ring_factor(b, ell));
  std::vector<const CMatrix*> ptrs;
  for (const auto& f : factors) ptrs.push_back(&f);
  return close_ring(ptrs);
}

ChargedMomentResult MomentEvaluator::charged_moment(std::span<const CMatrix> us, int ell) const {
  check_product_identity(us);
  if (ell < 0) throw Error(ErrorKind::BadParam, "subsystem length must be >= 0");
  ChargedMomentResult result;
  result.n = static_cast<int>(us.size());
  result.ell = ell;
  result.mode = mode_;
  std::vector<CMatrix> blocks;
  blocks.reserve(us.size());
  bool all_symmetric = true;
  double phase_sum = 0.0;
  for (const auto& u : us) {
    const auto r = build_charged_transfer(tensor_, u);
    const auto& lead = r.leading_pairs().front();
    const double modulus = std::abs(lead.value);
    result.dominant_moduli.push_back(modulus);
    if (std::abs(modulus - 1.0) > 1e-8) all_symmetric = false;
    phase_sum += std::arg(lead.value);
    blocks.push_back(matrix_power(r.matrix(), static_cast<unsigned long long>(ell)));
  }
  if (all_symmetric) result.phase_prediction = std::polar(1.0, phase_sum * ell);
  result.value = contract(blocks, ell);
  return result;
}

double MomentEvaluator::renyi_moment(int n, int ell) const {
  check_replicas(n);
  const CMatrix power = matrix_power(plain_.matrix(), static_cast<unsigned long long>(ell));
  return identity_moment(*this, n, power, ell);
}

double MomentEvaluator::renyi_moment_limit(int n) const {
  check_replicas(n);
  if (!mode_.is_infinite()) throw Error(ErrorKind::BadParam, "the infinite-interval limit needs infinite volume");
  const CMatrix pi = fixed_point_.right * fixed_point_.left.transpose();
  const CMatrix factor = rank_one_factor(pi, left_, right_, bond_dim());
  std::vector<const CMatrix*> ptrs(static_cast<std::size_t>(n), &factor);
  return close_ring(ptrs).real();
}

double renyi_entropy(const MpsTensor& t, int n, std::optional<int> ell) {
  check_replicas(n);
  const MomentEvaluator ev(t);
  const double moment = ell ? ev.renyi_moment(n, *ell) : ev.renyi_moment_limit(n);
  if (!(moment > 0.0)) throw Error(ErrorKind::NonFinite, "Tr(rho_A^n) is not positive");
  return std::log(moment) / (1.0 - n);
}

ChargedMomentResult charged_moment(const MpsTensor& t, std::span<const CMatrix> us, int ell, VolumeMode mode) {
  const MomentEvaluator ev(t, mode);
  return ev.charged_moment(us, ell);
}

AsymmetryReport asymmetry_finite_group(const MpsTensor& t, const FiniteGroupRep& g, int n,
                                       std::span<const int> ell_grid, const AsymmetryOptions& options) {
  check_replicas(n);
  const std::vector<int> grid = checked_grid(ell_grid);
  if (g.dim() != t.phys_dim()) throw Error(ErrorKind::ShapeMismatch, "group dimension differs from d");
  const std::size_t order = g.order();
  std::size_t terms = 1;
  for (int j = 0; j + 1 < n; ++j) {
    if (terms > options.term_cap / order) {
      std::ostringstream msg;
      msg << "|G|^(n-1) exceeds the term cap of " << options.term_cap;
      throw Error(ErrorKind::TermCapExceeded, msg.str());
    }
    terms *= order;
  }

  const MomentEvaluator ev(t, VolumeMode::infinite(), options.clustering_tol);
  std::vector<CMatrix> transfers;
  transfers.reserve(order);
  for (std::size_t i = 0; i < order; ++i) {
    transfers.push_back(build_charged_transfer(ev.tensor(), g.elements[i], i).matrix());
  }

  // Tuple k -> (g_1, ..., g_{n-1}) with g_1 the slowest digit; the closing element is
  // (g_1 ... g_{n-1})^{-1} = phase * elements[last]. The phase is 1 for genuine
  // representations and a root of unity for projective ones.
  const int free_slots = n - 1;
  std::vector<std::size_t> digits(terms * static_cast<std::size_t>(free_slots));
  std::vector<std::size_t> closing(terms);
  std::vector<cplx> closing_phase(terms);
  const double dim = g.dim();
  for (std::size_t k = 0; k < terms; ++k) {
    std::size_t rest = k;
    for (int j = free_slots - 1; j >= 0; --j) {
      digits[k * free_slots + j] = rest % order;
      rest /= order;
    }
    std::size_t prod_idx = 0;
    CMatrix prod = CMatrix::Identity(g.dim(), g.dim());
    for (int j = 0; j < free_slots; ++j) {
      const std::size_t e = digits[k * free_slots + j];
      prod_idx = g.cayley[prod_idx][e];
      prod = prod * g.elements[e];
    }
    const std::size_t last = g.inverse[prod_idx];
    const CMatrix inverse = prod.adjoint();
    closing[k] = last;
    closing_phase[k] = (g.elements[last].adjoint() * inverse).trace() / dim;
  }

  AsymmetryReport report;
  report.n = n;
  report.ell_grid = grid;
  std::ostringstream desc;
  desc << "finite group, order " << order << ", dim " << g.dim() << (g.projective ? ", projective" : "");
  report.group_descriptor = desc.str();
  report.delta_s.resize(grid.size());

  std::vector<std::size_t> order_idx(grid.size());
  std::iota(order_idx.begin(), order_idx.end(), 0);
  std::stable_sort(order_idx.begin(), order_idx.end(), [&](auto a, auto b) { return grid[a] < grid[b]; });

  std::vector<CMatrix> powers(order);
  for (std::size_t i = 0; i < order; ++i) powers[i] = CMatrix::Identity(transfers[i].rows(), transfers[i].cols());
  int previous = 0;
  std::vector<double> values(terms);
  for (const std::size_t gi : order_idx) {
    const int ell = grid[gi];
    std::vector<CMatrix> factors(order);
    parallel_for(order, options.threads, [&](std::size_t i) {
      if (ell != previous) {
        powers[i] = powers[i] * matrix_power(transfers[i], static_cast<unsigned long long>(ell - previous));
      }
      factors[i] = ev.ring_factor(powers[i], ell);
    });
    previous = ell;
    std::vector<const CMatrix*> id_ring(static_cast<std::size_t>(n), &factors[0]);
    const double trn = MomentEvaluator::close_ring(id_ring).real();
    if (!(trn > 0.0)) throw Error(ErrorKind::NonFinite, "Tr(rho_A^n) is not positive");

    parallel_for(terms, options.threads, [&](std::size_t k) {
      std::vector<const CMatrix*> ring(static_cast<std::size_t>(n));
      for (int j = 0; j < free_slots; ++j) ring[static_cast<std::size_t>(j)] = &factors[digits[k * free_slots + j]];
      ring.back() = &factors[closing[k]];
      const cplx value = MomentEvaluator::close_ring(ring) * std::pow(closing_phase[k], ell);
      values[k] = moment_ratio(value, trn);
    });
    const double mean = pairwise_sum(values) / static_cast<double>(terms);
    report.delta_s[gi] = assemble_delta_s(mean, n);
  }
  return report;
}

namespace {

// f(g) at every ell of the ascending grid for one tuple (g_1, ..., g_{n-1}).
std::vector<double> tuple_ratios(const MomentEvaluator& ev, std::span<const CMatrix> free_elements,
                                 std::span<const int> ascending, std::span<const double> trn) {
  const int n = static_cast<int>(free_elements.size()) + 1;
  std::vector<CMatrix> transfers;
  transfers.reserve(static_cast<std::size_t>(n));
  CMatrix prod = CMatrix::Identity(free_elements.front().rows(), free_elements.front().cols());
  for (const auto& u : free_elements) {
    transfers.push_back(build_charged_transfer(ev.tensor(), u).matrix());
    prod = prod * u;
  }
  transfers.push_back(build_charged_transfer(ev.tensor(), prod.adjoint()).matrix());

  std::vector<CMatrix> powers;
  for (const auto& r : transfers) powers.push_back(CMatrix::Identity(r.rows(), r.cols()));
  std::vector<CMatrix> factors(static_cast<std::size_t>(n));
  std::vector<const CMatrix*> ring(static_cast<std::size_t>(n));
  std::vector<double> out(ascending.size());
  int previous = 0;
  for (std::size_t k = 0; k < ascending.size(); ++k) {
    const int ell = ascending[k];
    for (std::size_t j = 0; j < transfers.size(); ++j) {
      if (ell != previous) {
        powers[j] = powers[j] * matrix_power(transfers[j], static_cast<unsigned long long>(ell - previous));
      }
      factors[j] = ev.ring_factor(powers[j], ell);
      ring[j] = &factors[j];
    }
    previous = ell;
    out[k] = moment_ratio(MomentEvaluator::close_ring(ring), trn[k]);
  }
  return out;
}

double ratio_at(const MomentEvaluator& ev, std::span<const CMatrix> free_elements, int ell, double trn) {
  const int grid[1] = {ell};
  const double norm[1] = {trn};
  return tuple_ratios(ev, free_elements, grid, norm).front();
}

struct QuadratureOutcome {
  double mean;
  int nodes;
};

// Trapezoid rule on the (n-1)-torus of U(1) angles, doubling K until two successive
// refinements agree to rel_tol. The integrand has Fourier modes up to ~ell, so a fixed K
// would alias at large ell.
QuadratureOutcome u1_quadrature(const MomentEvaluator& ev, const LieGroupRep& g, int free_slots, int ell, double trn,
                                const AsymmetryOptions& options) {
  const int max_nodes = free_slots == 1 ? options.max_nodes_1d : options.max_nodes_2d;
  int k_nodes = std::max(g.quadrature.nodes, 2);
  std::vector<double> grid_values;  // row-major over the free angles
  auto index_count = [&](int k) {
    std::size_t total = 1;
    for (int j = 0; j < free_slots; ++j) total *= static_cast<std::size_t>(k);
    return total;
  };
  auto evaluate = [&](int k, const std::vector<double>* coarse) {
    const std::size_t total = index_count(k);
    std::vector<double> values(total);
    parallel_for(total, options.threads, [&](std::size_t idx) {
      std::vector<int> coord(static_cast<std::size_t>(free_slots));
      std::size_t rest = idx;
      bool on_coarse = coarse != nullptr;
      for (int j = free_slots - 1; j >= 0; --j) {
        coord[static_cast<std::size_t>(j)] = static_cast<int>(rest % static_cast<std::size_t>(k));
        rest /= static_cast<std::size_t>(k);
        if (coord[static_cast<std::size_t>(j)] % 2 != 0) on_coarse = false;
      }
      if (on_coarse) {
        std::size_t coarse_idx = 0;
        for (int j = 0; j < free_slots; ++j) {
          coarse_idx = coarse_idx * static_cast<std::size_t>(k / 2) + static_cast<std::size_t>(coord[j] / 2);
        }
        values[idx] = (*coarse)[coarse_idx];
        return;
      }
      std::vector<CMatrix> elements;
      for (int c : coord) {
        const double angle[1] = {2.0 * std::numbers::pi * c / k};
        elements.push_back(g.element(angle));
      }
      values[idx] = ratio_at(ev, elements, ell, trn);
    });
    return values;
  };

  grid_values = evaluate(k_nodes, nullptr);
  double estimate = pairwise_sum(grid_values) / static_cast<double>(grid_values.size());
  int agreements = 0;
  while (true) {
    if (2 * k_nodes > max_nodes) {
      std::ostringstream msg;
      msg << "U(1) quadrature did not converge at ell=" << ell << " with " << k_nodes << " nodes per angle";
      throw Error(ErrorKind::NonConvergence, msg.str());
    }
    k_nodes *= 2;
    grid_values = evaluate(k_nodes, &grid_values);
    const double refined = pairwise_sum(grid_values) / static_cast<double>(grid_values.size());
    const bool close = std::abs(refined - estimate) <= options.quadrature_rel_tol * std::abs(refined) ||
                       std::abs(refined - estimate) < kUnderflow;
    estimate = refined;
    agreements = close ? agreements + 1 : 0;
    if (agreements >= 2) break;
  }
  return {estimate, k_nodes};
}

}  // namespace

AsymmetryReport asymmetry_lie_group(const MpsTensor& t, const LieGroupRep& g, int n, std::span<const int> ell_grid,
                                    const AsymmetryOptions& options) {
  check_replicas(n);
  const std::vector<int> grid = checked_grid(ell_grid);
  if (g.dim() != t.phys_dim()) throw Error(ErrorKind::ShapeMismatch, "group dimension differs from d");
  const MomentEvaluator ev(t, VolumeMode::infinite(), options.clustering_tol);
  const int free_slots = n - 1;
  const int integration_dim = free_slots * g.dim_g();

  AsymmetryReport report;
  report.n = n;
  report.ell_grid = grid;
  std::ostringstream desc;
  desc << (g.kind == LieKind::U1 ? "U(1)" : "SU(2)") << ", dim " << g.dim();
  report.group_descriptor = desc.str();
  report.delta_s.resize(grid.size());

  std::vector<std::size_t> order_idx(grid.size());
  std::iota(order_idx.begin(), order_idx.end(), 0);
  std::stable_sort(order_idx.begin(), order_idx.end(), [&](auto a, auto b) { return grid[a] < grid[b]; });
  std::vector<int> ascending;
  std::vector<double> trn;
  for (const auto gi : order_idx) {
    ascending.push_back(grid[gi]);
    trn.push_back(ev.renyi_moment(n, grid[gi]));
    if (!(trn.back() > 0.0)) throw Error(ErrorKind::NonFinite, "Tr(rho_A^n) is not positive");
  }

  const bool quadrature = g.kind == LieKind::U1 && integration_dim <= 2 &&
                          g.quadrature.scheme == QuadratureScheme::Equispaced;
  if (quadrature) {
    report.quadrature_nodes.resize(grid.size());
    for (std::size_t k = 0; k < ascending.size(); ++k) {
      const auto outcome = u1_quadrature(ev, g, free_slots, ascending[k], trn[k], options);
      report.delta_s[order_idx[k]] = assemble_delta_s(outcome.mean, n);
      report.quadrature_nodes[order_idx[k]] = outcome.nodes;
    }
    return report;
  }

  const int samples = g.quadrature.samples;
  const int batches = g.quadrature.batches;
  if (samples < batches || batches < 2) throw Error(ErrorKind::BadParam, "Monte Carlo needs samples >= batches >= 2");
  report.seed = g.quadrature.seed;

  // Haar tuples, drawn sequentially from one seeded stream so they do not depend on threads.
  std::vector<std::vector<double>> coords(static_cast<std::size_t>(samples) * free_slots);
  if (g.kind == LieKind::SU2) {
    const auto draws = haar_sample_su2(samples * free_slots, g.quadrature.seed);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      const auto c = draws[i].coordinates();
      coords[i].assign(c.begin(), c.end());
    }
  } else {
    std::mt19937_64 rng(g.quadrature.seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (auto& c : coords) c = {angle(rng)};
  }

  std::vector<std::vector<double>> ratios(static_cast<std::size_t>(samples));
  parallel_for(static_cast<std::size_t>(samples), options.threads, [&](std::size_t s) {
    std::vector<CMatrix> elements;
    for (int j = 0; j < free_slots; ++j) elements.push_back(g.element(coords[s * free_slots + j]));
    ratios[s] = tuple_ratios(ev, elements, ascending, trn);
  });

  std::vector<double> errors(grid.size());
  const std::size_t per_batch = static_cast<std::size_t>(samples / batches);
  for (std::size_t k = 0; k < ascending.size(); ++k) {
    std::vector<double> column(static_cast<std::size_t>(samples));
    for (std::size_t s = 0; s < column.size(); ++s) column[s] = ratios[s][k];
    const double mean = pairwise_sum(column) / static_cast<double>(samples);
    std::vector<double> batch_means(static_cast<std::size_t>(batches));
    for (int b = 0; b < batches; ++b) {
      const std::span<const double> chunk(column.data() + b * per_batch, per_batch);
      batch_means[static_cast<std::size_t>(b)] = pairwise_sum(chunk) / static_cast<double>(per_batch);
    }
    const double batch_mean = pairwise_sum(batch_means) / batches;
    double var = 0.0;
    for (double m : batch_means) var += (m - batch_mean) * (m - batch_mean);
    var /= (batches - 1);
    const double std_err = std::sqrt(var / batches);
    if (!(mean > 0.0) || std_err > options.mc_max_rel_err * mean) {
      std::ostringstream msg;
      msg << "Monte Carlo standard error " << std_err << " exceeds " << options.mc_max_rel_err * 100
          << "% of the mean " << mean << " at ell=" << ascending[k];
      throw Error(ErrorKind::MCVarianceTooLarge, msg.str());
    }
    report.delta_s[order_idx[k]] = assemble_delta_s(mean, n);
    errors[order_idx[k]] = std_err / (mean * (n - 1));
  }
  report.mc_std_err = std::move(errors);
  return report;
}

cplx free_energy_density(const MpsTensor& t, std::span<const CMatrix> us) {
  check_product_identity(us);
  const MpsTensor normalized = normalize(t);
  const cplx lead = build_transfer_operator(normalized).leading_pairs().front().value;
  cplx f = static_cast<double>(us.size()) * std::log(lead);
  for (const auto& u : us) {
    const cplx lambda = build_charged_transfer(normalized, u).leading_pairs().front().value;
    if (std::abs(lambda) < kUnderflow) return {std::numeric_limits<double>::infinity(), 0.0};
    f -= std::log(lambda);
  }
  // F is defined modulo 2 pi i; report the principal phase so inverse pairs cancel to 0
  const double phase = std::remainder(f.imag(), 2.0 * std::numbers::pi);
  return {f.real(), phase == -std::numbers::pi ? std::numbers::pi : phase};
}

HessianResult hessian_at_subgroup(const MpsTensor& t, const LieGroupRep& g, std::span<const CMatrix> h_point, int n,
                                  double step) {
  check_replicas(n);
  if (static_cast<int>(h_point.size()) != n - 1) throw Error(ErrorKind::BadParam, "need n-1 subgroup elements");
  if (!(step > 0.0)) throw Error(ErrorKind::BadParam, "finite-difference step must be positive");
  const auto sub = detect_invariant_subalgebra(t, g);
  const RMatrix& coset = sub.coset_basis;
  const int k = static_cast<int>(coset.cols());
  const int vars = (n - 1) * k;

  HessianResult result;
  result.step = step;
  result.hessian = RMatrix::Zero(vars, vars);
  result.gradient = RVector::Zero(vars);
  result.eigenvalues = RVector::Zero(vars);
  result.positive_definite = true;
  if (vars == 0) return result;

  auto energy = [&](const RVector& x) {
    std::vector<CMatrix> us;
    CMatrix prod = CMatrix::Identity(g.dim(), g.dim());
    for (int j = 0; j < n - 1; ++j) {
      const RVector c = coset * x.segment(j * k, k);
      const std::vector<double> coords(c.data(), c.data() + c.size());
      us.push_back(h_point[static_cast<std::size_t>(j)] * g.element(coords));
      prod = prod * us.back();
    }
    us.push_back(prod.adjoint());
    return free_energy_density(t, us).real();
  };

  auto central = [&](double h) {
    RMatrix hess(vars, vars);
    const double f0 = energy(RVector::Zero(vars));
    auto shifted = [&](int i, double si, int j, double sj) {
      RVector x = RVector::Zero(vars);
      x[i] += si;
      x[j] += sj;
      return energy(x);
    };
    for (int i = 0; i < vars; ++i) {
      hess(i, i) = (shifted(i, h, i, 0.0) - 2.0 * f0 + shifted(i, -h, i, 0.0)) / (h * h);
      for (int j = i + 1; j < vars; ++j) {
        const double v =
            (shifted(i, h, j, h) - shifted(i, h, j, -h) - shifted(i, -h, j, h) + shifted(i, -h, j, -h)) / (4 * h * h);
        hess(i, j) = v;
        hess(j, i) = v;
      }
    }
    return hess;
  };

  result.hessian = (4.0 * central(0.5 * step) - central(step)) / 3.0;
  result.hessian = 0.5 * (result.hessian + result.hessian.transpose()).eval();
  for (int i = 0; i < vars; ++i) {
    RVector plus = RVector::Zero(vars);
    plus[i] = step;
    result.gradient[i] = (energy(plus) - energy(-plus)) / (2.0 * step);
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> solver(result.hessian);
  result.eigenvalues = solver.eigenvalues();
  result.positive_definite = result.eigenvalues.minCoeff() > 0.0;
  return result;
}

namespace {

struct ExponentialSum {
  double rate;
  double amplitude;
  double residual_rms;
};

// Linear-prediction (Prony) fit diff(ell) = sum_j c_j z_j^ell on a uniform grid, with the
// order raised until the data are reproduced to 1e-8 relative. Returns the largest |z_j|
// whose term stays above the noise floor over the grid; a single log-linear fit would be
// biased by oscillating complex pairs and by mixed orders lambda_2^ell, lambda_2^{2 ell}.
std::optional<ExponentialSum> exponential_sum_fit(const std::vector<double>& ells, const std::vector<double>& diffs,
                                                  double scale) {
  const auto count = static_cast<Eigen::Index>(ells.size());
  if (count < 5) return std::nullopt;
  const double step = ells[1] - ells[0];
  if (!(step > 0.0)) return std::nullopt;
  for (Eigen::Index k = 1; k < count; ++k) {
    if (std::abs(ells[static_cast<std::size_t>(k)] - ells[static_cast<std::size_t>(k - 1)] - step) > 1e-12) {
      return std::nullopt;
    }
  }
  const RVector d = Eigen::Map<const RVector>(diffs.data(), count);
  const double norm = d.norm();
  const double floor = 1e-10 * scale;
  std::optional<ExponentialSum> best;
  double best_resid = std::numeric_limits<double>::infinity();
  const Eigen::Index max_order = std::min<Eigen::Index>(8, (count - 1) / 2);
  for (Eigen::Index m = 1; m <= max_order; ++m) {
    RMatrix design(count - m, m);
    RVector rhs(count - m);
    for (Eigen::Index k = 0; k + m < count; ++k) {
      for (Eigen::Index i = 0; i < m; ++i) design(k, i) = d[k + i];
      rhs[k] = d[k + m];
    }
    const RVector a = design.colPivHouseholderQr().solve(rhs);
    RMatrix companion = RMatrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) companion(m - 1, i) = a[i];
    for (Eigen::Index i = 0; i + 1 < m; ++i) companion(i, i + 1) = 1.0;
    const CVector roots = Eigen::EigenSolver<RMatrix>(companion).eigenvalues();
    CMatrix vander(count, m);
    for (Eigen::Index k = 0; k < count; ++k) {
      for (Eigen::Index j = 0; j < m; ++j) vander(k, j) = std::pow(roots[j], static_cast<double>(k));
    }
    const CVector amps = vander.colPivHouseholderQr().solve(d.cast<cplx>());
    const double resid = (vander * amps - d.cast<cplx>()).norm() / norm;
    if (!std::isfinite(resid)) continue;
    double rate = 0.0;
    double amplitude = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double tail = std::abs(amps[j] * std::pow(roots[j], static_cast<double>(count - 1)));
      if (tail < floor || std::abs(roots[j]) >= 1.0) continue;
      const double modulus = std::pow(std::abs(roots[j]), 1.0 / step);
      if (modulus > rate) {
        rate = modulus;
        amplitude = std::abs(amps[j]) / std::pow(std::abs(roots[j]), ells[0] / step);
      }
    }
    if (rate == 0.0) continue;
    if (resid < best_resid) {
      best_resid = resid;
      best = ExponentialSum{rate, amplitude, resid * norm / std::sqrt(static_cast<double>(count))};
    }
    if (resid < 1e-8) break;
  }
  return best;
}

// R^ell = Pi + sum_k lambda_k^ell r_k l_k^T + ...; replacing one replica block by
// r_k l_k^T gives the coefficient of lambda_k^ell in Tr(rho_A^n).
double first_order_weight(const MomentEvaluator& ev, int n, double subleading) {
  const CMatrix& r = ev.transfer().matrix();
  if (r.rows() < 2 || subleading == 0.0 || r.rows() > 1024) return 0.0;
  Eigen::ComplexEigenSolver<CMatrix> solver(r);
  const CMatrix& vecs = solver.eigenvectors();
  const Eigen::PartialPivLU<CMatrix> lu(vecs);
  const CMatrix lefts = lu.inverse();  // rows: left eigenvectors, biorthonormal to the columns
  const double lead = std::abs(ev.fixed_point().value);
  const CMatrix pi = ev.fixed_point().right * ev.fixed_point().left.transpose();
  const CMatrix pi_factor = ev.ring_factor(pi, 0);
  double total = 0.0;
  for (Eigen::Index k = 0; k < r.rows(); ++k) {
    if (std::abs(std::abs(solver.eigenvalues()[k]) / lead - subleading) > 1e-8) continue;
    const CMatrix proj = vecs.col(k) * lefts.row(k);
    const CMatrix factor = ev.ring_factor(proj, 0);
    cplx coeff = 0.0;
    for (int j = 0; j < n; ++j) {
      std::vector<const CMatrix*> ring(static_cast<std::size_t>(n), &pi_factor);
      ring[static_cast<std::size_t>(j)] = &factor;
      coeff += MomentEvaluator::close_ring(ring);
    }
    total += std::abs(coeff);
  }
  return total;
}

}  // namespace

FitResult subleading_correction_fit(const MpsTensor& t, int n, std::span<const int> ell_grid) {
  check_replicas(n);
  const std::vector<int> grid = checked_grid(ell_grid);
  const MomentEvaluator ev(t);
  const double asymptote = ev.renyi_moment_limit(n);
  const double floor = 1e-10 * std::abs(asymptote);
  std::vector<double> ells;
  std::vector<double> diffs;
  for (int ell : grid) {
    const double diff = ev.renyi_moment(n, ell) - asymptote;
    if (std::abs(diff) > floor) {
      ells.push_back(ell);
      diffs.push_back(diff);
    }
  }
  if (ells.size() < 3) {
    throw Error(ErrorKind::FitIllConditioned,
                "finite-size correction is below the noise floor; there is no subleading eigenvalue to fit");
  }
  const auto& pairs = ev.transfer().leading_pairs();
  const double reference = pairs.size() > 1 ? std::abs(pairs[1].value) / std::abs(pairs[0].value) : 0.0;
  const double weight = first_order_weight(ev, n, reference);

  FitResult fit;
  fit.model = FitModel::ExponentialDecay;
  fit.points = ells.size();
  fit.reference_rate = reference;
  fit.first_order_weight = weight;

  if (const auto sum = exponential_sum_fit(ells, diffs, std::abs(asymptote))) {
    fit.rate = sum->rate;
    fit.amplitude = sum->amplitude;
    fit.residual_rms = sum->residual_rms;
    return fit;
  }
  // non-uniform grid: log|diff| = log b + ell log r
  RMatrix design(static_cast<Eigen::Index>(ells.size()), 2);
  RVector rhs(static_cast<Eigen::Index>(ells.size()));
  for (std::size_t i = 0; i < ells.size(); ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    design(static_cast<Eigen::Index>(i), 1) = ells[i];
    rhs[static_cast<Eigen::Index>(i)] = std::log(std::abs(diffs[i]));
  }
  const RVector coef = design.colPivHouseholderQr().solve(rhs);
  const RVector resid = design * coef - rhs;
  fit.amplitude = std::exp(coef[0]);
  fit.rate = std::exp(coef[1]);
  fit.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(ells.size()));
  return fit;
}

}  // namespace asymkit
