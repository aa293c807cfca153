#pragma once

// Cross-validation suites comparing the transfer-operator pipeline with the brute-force
// oracle. Shared by the `oracle-check` subcommand and the acceptance run.

#include <cstdint>
#include <string>
#include <vector>

namespace asymkit {

struct CheckCase {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string note;
};

struct CheckSummary {
  std::vector<CheckCase> cases;
  bool passed() const;
  double max_error() const;
  int failures() const;
};

struct MomentSuiteOptions {
  int cases = 50;
  std::uint64_t seed = 1;
  int length = 30;  // ring length of the oracle chain
  double tol = 1e-6;
};

/// Charged moments (n = 2, 3, random unitaries) and Renyi entropies of seeded random
/// d = 2, D in {2, 3} tensors for ell = 1..3, pipeline on a ring of `length` sites
/// against the exact reduced density matrix of the same ring.
CheckSummary moment_oracle_suite(const MomentSuiteOptions& options = {});

struct SymmetrizationSuiteOptions {
  int cases = 20;
  std::uint64_t seed = 1;
  int mc_samples = 100000;
  double tol = 1e-10;
};

/// Group-average, abelian-sector, invariant-basis and Haar Monte Carlo symmetrization on
/// rotating families (SU(2) two sites, S3 on three qubits, GHZ with spin flip, diagonal Z4,
/// U(1) on a tilted product), with density-matrix, commutant, contraction and block-structure
/// checks on every output, plus one corrupted state that must be rejected.
CheckSummary symmetrization_suite(const SymmetrizationSuiteOptions& options = {});

}  // namespace asymkit
