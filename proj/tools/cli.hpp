#pragma once

// Experiment configuration and subcommands of the asymmetry_kit runner.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asymkit/io.hpp"
#include "asymkit/moments.hpp"
#include "asymkit/states.hpp"
#include "asymkit/symmetry.hpp"

namespace asymkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitNonClustering = 4;

struct Tolerances {
  double clustering = 1e-8;
  double quadrature_rel = 1e-10;
  double mc_max_rel_err = 0.1;
  double energy = 1e-10;
  std::size_t term_cap = 1'000'000;
  int max_nodes_1d = 1 << 16;
  int max_nodes_2d = 1 << 10;
};

struct ExperimentConfig {
  Json state;  // state descriptor
  Json group;  // group descriptor (may be null for state-info)
  Json sweep;  // sweep ranges (sweep subcommand only)
  std::vector<int> n_list{2};
  std::vector<int> ell_grid;
  std::optional<std::uint64_t> seed;
  bool seed_from_flag = false;  // --seed beats every seed in the file
  int threads = 1;
  Tolerances tol;
  std::string out_dir = ".";
  std::string basename = "report";
  std::optional<FitModel> fit;
};

/// Validates the schema; throws Error(Config).
ExperimentConfig parse_config(const Json& j);
/// "key=value" override of one tolerance.
void apply_tolerance(Tolerances& tol, const std::string& assignment);
Json tolerances_to_json(const Tolerances& tol);

std::vector<int> parse_grid(const Json& j);
FitModel parse_fit_model(const std::string& name);

MpsTensor build_state(const Json& descriptor, const ExperimentConfig& config);

struct GroupSpec {
  bool finite = true;
  FiniteGroupRep finite_group;
  LieGroupRep lie_group;
  std::string descriptor;
  int dim() const { return finite ? finite_group.dim() : lie_group.dim(); }
};

/// `max_n` is the largest replica index that will be evaluated; it decides whether Monte
/// Carlo is implied and therefore whether a seed is mandatory.
GroupSpec build_group(const Json& descriptor, const ExperimentConfig& config, int max_n);

AsymmetryOptions asymmetry_options(const ExperimentConfig& config);

/// Parses argv and runs one subcommand; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace asymkit::cli
