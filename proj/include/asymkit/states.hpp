#pragma once

// Analytically known uniform MPS and an imaginary-time TEBD ground-state finder for the
// gapped spin-1/2 XXZ chain H = sum_j (X_j X_{j+1} + Y_j Y_{j+1} + delta Z_j Z_{j+1}).
// Spin-1/2 basis order is (up, down); spin-1 order is (m=+1, 0, -1).

#include <cstdint>
#include <vector>

#include "asymkit/mps.hpp"

namespace asymkit {

enum class CatalogState { Ferromagnet, TiltedProduct, Neel, Ghz, Aklt, Random };

struct CatalogParams {
  double theta = 0.0;  // tilted product: cos(theta/2)|up> + sin(theta/2)|down>
  double p = 1.0;      // GHZ weight of the all-up string
  int phys_dim = 2;    // random
  int bond_dim = 2;    // random
  std::uint64_t seed = 0;
  bool spin_down = false;  // ferromagnet polarized down instead of up
};

/// Normalized catalog tensors. Neel is the two-site blocked |up down> (d = 4, D = 1).
/// GHZ(p) for 0 < p < 1 is the D = 2 diagonal tensor with boundary diag(sqrt p, sqrt(1-p));
/// the transfer operator ignores the boundary, so it is not clustering. p = 0 and p = 1
/// are the product ferromagnets.
MpsTensor catalog(CatalogState state, const CatalogParams& params = {});

MpsTensor ferromagnet(bool spin_down = false);
MpsTensor tilted_product(double theta);
MpsTensor neel();
MpsTensor ghz(double p);
MpsTensor aklt();
MpsTensor random_mps(int phys_dim, int bond_dim, std::uint64_t seed);

struct TrotterStage {
  double dtau;
  int max_steps;
};

struct XxzSpec {
  double delta = 2.0;
  int bond_dim = 16;
  std::vector<TrotterStage> schedule = {{0.1, 2000}, {0.01, 2000}, {0.001, 2000}};
  double energy_tol = 1e-10;
  int unit_cell = 2;
};

enum class PhaseHint { Antiferro, Ferro };

struct ConvergenceRow {
  int sweep;
  double dtau;
  double energy_density;
  double truncation_weight;
};

struct XxzResult {
  MpsTensor tensor;  // two-site blocked, d = 4
  double energy_density = 0.0;
  double truncation_weight = 0.0;  // largest discarded weight of the final stage
  std::vector<ConvergenceRow> log;
};

/// Two-site iTEBD in imaginary time, second-order Trotter, seeded by a Neel (antiferro)
/// or polarized (ferro) product state. Requires |delta| > 1.
XxzResult xxz_ground_state(const XxzSpec& spec, PhaseHint hint);

/// Two-site XXZ bond Hamiltonian, 4 x 4, first site slowest.
CMatrix xxz_bond_hamiltonian(double delta);

/// Energy per site of a two-site blocked state for the XXZ chain, from transfer fixed points.
double xxz_energy_density(const MpsTensor& blocked, double delta);

}  // namespace asymkit
