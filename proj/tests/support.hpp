#pragma once

// Test-side reference computations. Deliberately naive and independent of the library's
// contraction code paths.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "asymkit/linalg.hpp"
#include "asymkit/mps.hpp"

namespace testkit {

using asymkit::CMatrix;
using asymkit::cplx;
using asymkit::CVector;
using asymkit::MpsTensor;

inline CMatrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  CMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = cplx(normal(rng), normal(rng));
  }
  return m;
}

// sum_{s,s'} (M_s)_{ab} conj(M_{s'})_{a'b'} u_{s's}, one entry at a time
inline CMatrix brute_transfer(const MpsTensor& t, const CMatrix* u = nullptr) {
  const int d = t.phys_dim();
  const int bond = t.bond_dim();
  CMatrix r = CMatrix::Zero(bond * bond, bond * bond);
  for (int a = 0; a < bond; ++a)
    for (int ap = 0; ap < bond; ++ap)
      for (int b = 0; b < bond; ++b)
        for (int bp = 0; bp < bond; ++bp)
          for (int s = 0; s < d; ++s)
            for (int sp = 0; sp < d; ++sp) {
              const cplx w = u != nullptr ? (*u)(sp, s) : cplx(s == sp ? 1.0 : 0.0);
              if (w == cplx(0.0)) continue;
              r(a * bond + ap, b * bond + bp) += t[s](a, b) * std::conj(t[sp](ap, bp)) * w;
            }
  return r;
}

inline CMatrix naive_power(const CMatrix& m, int k) {
  CMatrix out = CMatrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < k; ++i) out = out * m;
  return out;
}

// eigenvalues by descending modulus, ties towards larger real part
inline CVector dense_eigenvalues(const CMatrix& m) {
  Eigen::ComplexEigenSolver<CMatrix> solver(m, false);
  std::vector<cplx> v(solver.eigenvalues().begin(), solver.eigenvalues().end());
  std::sort(v.begin(), v.end(), [](cplx a, cplx b) {
    if (std::abs(std::abs(a) - std::abs(b)) > 1e-12) return std::abs(a) > std::abs(b);
    return a.real() > b.real();
  });
  return Eigen::Map<CVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// max |<v|m|v>| over a grid on the unit sphere of C^2 (global phase dropped)
inline double grid_numerical_radius_2x2(const CMatrix& m, int steps = 2000) {
  double best = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double t = 0.5 * M_PI * i / steps;
    for (int j = 0; j < 64; ++j) {
      const double phi = 2.0 * M_PI * j / 64;
      CVector v(2);
      v << std::cos(t), std::polar(std::sin(t), phi);
      best = std::max(best, std::abs(v.dot(m * v)));
    }
  }
  return best;
}

// amplitude Tr(B M_{s_1} ... M_{s_L}) by explicit products, first site slowest
inline CVector amplitudes_by_products(const MpsTensor& t, int length) {
  const int d = t.phys_dim();
  long long total = 1;
  for (int i = 0; i < length; ++i) total *= d;
  CVector psi(total);
  const CMatrix b = t.boundary() ? *t.boundary() : CMatrix::Identity(t.bond_dim(), t.bond_dim());
  for (long long idx = 0; idx < total; ++idx) {
    std::vector<int> s(static_cast<std::size_t>(length));
    long long rest = idx;
    for (int k = length - 1; k >= 0; --k) {
      s[static_cast<std::size_t>(k)] = static_cast<int>(rest % d);
      rest /= d;
    }
    CMatrix prod = b;
    for (int k = 0; k < length; ++k) prod = prod * t[s[static_cast<std::size_t>(k)]];
    psi[idx] = prod.trace();
  }
  return psi / psi.norm();
}

// Ground-state energy per site of sum_j (X X + Y Y + delta Z Z) on a ring of L spins, Lanczos.
inline double xxz_ring_energy(int length, double delta, int iterations = 300) {
  const std::size_t dim = std::size_t{1} << length;
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t st = 0; st < dim; ++st) {
      if (x[st] == 0.0) continue;
      for (int j = 0; j < length; ++j) {
        const int k = (j + 1) % length;
        const std::size_t bj = (st >> j) & 1u, bk = (st >> k) & 1u;
        if (bj == bk) {
          y[st] += delta * x[st];
        } else {
          y[st] -= delta * x[st];
          y[st ^ ((std::size_t{1} << j) | (std::size_t{1} << k))] += 2.0 * x[st];
        }
      }
    }
  };
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::vector<double> v(dim), w(dim), prev(dim, 0.0);
  double norm = 0.0;
  for (auto& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  for (auto& x : v) x /= std::sqrt(norm);
  std::vector<double> alpha, beta;
  double b = 0.0;
  for (int it = 0; it < iterations; ++it) {
    apply(v, w);
    double a = 0.0;
    for (std::size_t i = 0; i < dim; ++i) a += w[i] * v[i];
    for (std::size_t i = 0; i < dim; ++i) w[i] -= a * v[i] + b * prev[i];
    alpha.push_back(a);
    double nb = 0.0;
    for (double x : w) nb += x * x;
    nb = std::sqrt(nb);
    if (nb < 1e-12) break;
    beta.push_back(nb);
    prev = v;
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / nb;
    b = nb;
  }
  const int m = static_cast<int>(alpha.size());
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    tri(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(tri, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()[0] / length;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace testkit
