#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "asymkit/error.hpp"
#include "cli.hpp"

namespace asymkit::cli {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    config_error(std::string("key '") + key + "' has the wrong type");
  }
}

template <class T>
T require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) config_error(where + " needs '" + key + "'");
  return get_or<T>(j, key, T{});
}

void only_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
      config_error(where + ": unknown key '" + item.key() + "'");
    }
  }
}

std::vector<CMatrix> matrices(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) config_error(where + " must be a non-empty list of matrices");
  std::vector<CMatrix> out;
  for (const auto& m : j) out.push_back(matrix_from_json(m));
  return out;
}

CMatrix axis_rotation(const std::string& axis, double theta, double spin) {
  const auto s = spin_matrices(spin);
  const int a = axis == "x" ? 0 : axis == "y" ? 1 : 2;
  return expm_antihermitian(cplx(0.0, -theta) * s[static_cast<std::size_t>(a)]);
}

std::uint64_t resolve_seed(const Json& local, const ExperimentConfig& config, bool& found) {
  found = true;
  if (config.seed_from_flag && config.seed) return *config.seed;
  if (local.is_object() && local.contains("seed")) return get_or<std::uint64_t>(local, "seed", 0);
  if (config.seed) return *config.seed;
  found = false;
  return 0;
}

}  // namespace

std::vector<int> parse_grid(const Json& j) {
  std::vector<int> grid;
  if (j.is_null()) return grid;
  if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number_integer()) config_error("ell grid entries must be integers");
      grid.push_back(v.get<int>());
    }
  } else if (j.is_object() && j.contains("range")) {
    const Json& r = j.at("range");
    only_keys(r, {"start", "stop", "step"}, "ell.range");
    const int start = require<int>(r, "start", "ell.range");
    const int stop = require<int>(r, "stop", "ell.range");
    const int step = get_or<int>(r, "step", 1);
    if (step < 1) config_error("ell.range.step must be >= 1");
    for (int v = start; v <= stop; v += step) grid.push_back(v);
  } else if (j.is_object() && j.contains("geometric")) {
    const Json& g = j.at("geometric");
    only_keys(g, {"start", "stop", "factor"}, "ell.geometric");
    const double start = require<double>(g, "start", "ell.geometric");
    const double stop = require<double>(g, "stop", "ell.geometric");
    const double factor = require<double>(g, "factor", "ell.geometric");
    if (!(factor > 1.0) || !(start >= 1.0)) config_error("ell.geometric needs start >= 1 and factor > 1");
    for (int k = 0;; ++k) {
      const double v = start * std::pow(factor, k);
      if (v > stop * (1.0 + 1e-12)) break;
      grid.push_back(static_cast<int>(std::lround(v)));
    }
  } else {
    config_error("ell must be a list, {\"range\": ...} or {\"geometric\": ...}");
  }
  for (int v : grid) {
    if (v < 1) config_error("ell values must be >= 1");
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

FitModel parse_fit_model(const std::string& name) {
  if (name == "exponential_to_constant" || name == "exponential") return FitModel::ExponentialToConstant;
  if (name == "log_slope") return FitModel::LogSlope;
  config_error("unknown fit model '" + name + "' (exponential_to_constant | log_slope)");
}

void apply_tolerance(Tolerances& tol, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) config_error("--tol expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    config_error("tolerance '" + key + "' needs a number, got '" + value + "'");
  }
  if (!(v > 0.0)) config_error("tolerance '" + key + "' must be positive");
  if (key == "clustering") {
    tol.clustering = v;
  } else if (key == "quadrature_rel") {
    tol.quadrature_rel = v;
  } else if (key == "mc_max_rel_err") {
    tol.mc_max_rel_err = v;
  } else if (key == "energy") {
    tol.energy = v;
  } else if (key == "term_cap") {
    tol.term_cap = static_cast<std::size_t>(v);
  } else if (key == "max_nodes_1d") {
    tol.max_nodes_1d = static_cast<int>(v);
  } else if (key == "max_nodes_2d") {
    tol.max_nodes_2d = static_cast<int>(v);
  } else {
    config_error("unknown tolerance '" + key + "'");
  }
}

Json tolerances_to_json(const Tolerances& tol) {
  return {{"clustering", tol.clustering},     {"quadrature_rel", tol.quadrature_rel},
          {"mc_max_rel_err", tol.mc_max_rel_err}, {"energy", tol.energy},
          {"term_cap", tol.term_cap},         {"max_nodes_1d", tol.max_nodes_1d},
          {"max_nodes_2d", tol.max_nodes_2d}};
}

ExperimentConfig parse_config(const Json& j) {
  only_keys(j, {"state", "group", "sweep", "n", "ell", "seed", "threads", "tolerances", "output", "fit"}, "config");
  ExperimentConfig c;
  if (j.contains("state")) c.state = j.at("state");
  if (j.contains("group")) c.group = j.at("group");
  if (j.contains("sweep")) c.sweep = j.at("sweep");
  if (j.contains("n")) {
    const Json& n = j.at("n");
    c.n_list.clear();
    if (n.is_number_integer()) {
      c.n_list.push_back(n.get<int>());
    } else if (n.is_array()) {
      for (const auto& v : n) {
        if (!v.is_number_integer()) config_error("n entries must be integers");
        c.n_list.push_back(v.get<int>());
      }
    } else {
      config_error("n must be an integer or a list");
    }
    for (int v : c.n_list) {
      if (v < 2) config_error("replica index n must be >= 2");
    }
  }
  if (j.contains("ell")) c.ell_grid = parse_grid(j.at("ell"));
  if (j.contains("seed")) c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.threads = get_or<int>(j, "threads", 1);
  if (c.threads < 1) config_error("threads must be >= 1");
  if (j.contains("tolerances")) {
    const Json& t = j.at("tolerances");
    if (!t.is_object()) config_error("tolerances must be an object");
    for (const auto& item : t.items()) {
      if (!item.value().is_number()) config_error("tolerance '" + item.key() + "' must be a number");
      std::ostringstream v;
      v.precision(17);
      v << item.value().get<double>();
      apply_tolerance(c.tol, item.key() + "=" + v.str());
    }
  }
  if (j.contains("output")) {
    const Json& o = j.at("output");
    only_keys(o, {"dir", "basename"}, "output");
    c.out_dir = get_or<std::string>(o, "dir", c.out_dir);
    c.basename = get_or<std::string>(o, "basename", c.basename);
  }
  if (j.contains("fit") && !j.at("fit").is_null()) c.fit = parse_fit_model(get_or<std::string>(j, "fit", ""));
  return c;
}

MpsTensor build_state(const Json& d, const ExperimentConfig& config) {
  const std::string name = require<std::string>(d, "state", "state descriptor");
  MpsTensor t = ferromagnet();
  if (name == "ferromagnet") {
    only_keys(d, {"state", "spin_down", "block"}, "state");
    t = ferromagnet(get_or<bool>(d, "spin_down", false));
  } else if (name == "tilted") {
    only_keys(d, {"state", "theta", "block"}, "state");
    t = tilted_product(require<double>(d, "theta", "tilted state"));
  } else if (name == "neel") {
    only_keys(d, {"state", "block"}, "state");
    t = neel();
  } else if (name == "ghz") {
    only_keys(d, {"state", "p", "block"}, "state");
    t = ghz(require<double>(d, "p", "ghz state"));
  } else if (name == "aklt") {
    only_keys(d, {"state", "block"}, "state");
    t = aklt();
  } else if (name == "random") {
    only_keys(d, {"state", "d", "D", "seed", "block"}, "state");
    bool found = false;
    const std::uint64_t seed = resolve_seed(d, config, found);
    if (!found) config_error("random state needs a seed (state.seed, config seed or --seed)");
    t = random_mps(get_or<int>(d, "d", 2), get_or<int>(d, "D", 2), seed);
  } else if (name == "xxz") {
    only_keys(d, {"state", "delta", "bond_dim", "phase", "energy_tol", "schedule", "block"}, "state");
    XxzSpec spec;
    spec.delta = require<double>(d, "delta", "xxz state");
    spec.bond_dim = get_or<int>(d, "bond_dim", spec.bond_dim);
    spec.energy_tol = get_or<double>(d, "energy_tol", config.tol.energy);
    if (d.contains("schedule")) {
      spec.schedule.clear();
      for (const auto& stage : d.at("schedule")) {
        if (!stage.is_array() || stage.size() != 2) config_error("schedule stages are [dtau, max_steps]");
        spec.schedule.push_back({stage[0].get<double>(), stage[1].get<int>()});
      }
    }
    const std::string phase = get_or<std::string>(d, "phase", "antiferro");
    if (phase != "antiferro" && phase != "ferro") config_error("xxz phase must be antiferro or ferro");
    t = xxz_ground_state(spec, phase == "ferro" ? PhaseHint::Ferro : PhaseHint::Antiferro).tensor;
  } else if (name == "file") {
    only_keys(d, {"state", "path", "block"}, "state");
    const std::string path = require<std::string>(d, "path", "file state");
    std::ifstream in(path);
    if (!in) config_error("cannot open tensor file '" + path + "'");
    Json j;
    try {
      in >> j;
    } catch (const Json::exception& e) {
      config_error("tensor file '" + path + "' is not valid JSON: " + e.what());
    }
    t = normalize(mps_from_json(j));
  } else {
    config_error("unknown state '" + name + "' (ferromagnet, tilted, neel, ghz, aklt, random, xxz, file)");
  }
  const int block = get_or<int>(d, "block", 1);
  if (block < 1) config_error("block must be >= 1");
  return block == 1 ? t : block_sites(t, block);
}

GroupSpec build_group(const Json& d, const ExperimentConfig& config, int max_n) {
  const std::string kind = require<std::string>(d, "kind", "group descriptor");
  only_keys(d, {"kind", "generators", "preset", "theta", "spin", "sites", "quotient_phase", "max_order", "quadrature"},
            "group");
  const int sites = get_or<int>(d, "sites", 1);
  if (sites < 1) config_error("group sites must be >= 1");
  const double spin = get_or<double>(d, "spin", 0.5);
  GroupSpec g;
  g.descriptor = d.dump();
  if (kind == "finite") {
    std::vector<CMatrix> gens;
    if (d.contains("generators")) {
      gens = matrices(d.at("generators"), "group.generators");
    } else {
      const std::string preset = require<std::string>(d, "preset", "finite group");
      const double theta = get_or<double>(d, "theta", std::numbers::pi / 2);
      if (preset == "x_rotation" || preset == "y_rotation" || preset == "z_rotation") {
        gens.push_back(axis_rotation(preset.substr(0, 1), theta, spin));
      } else if (preset == "spin_flip") {
        gens.push_back(axis_rotation("x", std::numbers::pi, spin));
        if (spin == 0.5) gens.back() = pauli_x();
      } else {
        config_error("unknown finite preset '" + preset + "' (x_rotation, y_rotation, z_rotation, spin_flip)");
      }
    }
    for (auto& m : gens) m = kron_power(m, sites);
    g.finite_group = generate_group(gens, get_or<std::size_t>(d, "max_order", 1024));
    if (get_or<bool>(d, "quotient_phase", false)) g.finite_group = quotient_global_phase(g.finite_group);
    g.descriptor += " |G|=" + std::to_string(g.finite_group.order());
    return g;
  }
  if (kind != "u1" && kind != "su2") config_error("group kind must be finite, u1 or su2");
  g.finite = false;
  std::vector<CMatrix> gens;
  if (d.contains("generators")) {
    gens = matrices(d.at("generators"), "group.generators");
  } else if (kind == "u1") {
    // -i (S_z + s): integer charges 0..2s, period 2 pi
    const auto s = spin_matrices(spin);
    gens.push_back(cplx(0.0, -1.0) * (s[2] + spin * CMatrix::Identity(s[2].rows(), s[2].cols())));
  } else {
    gens = su2_generators(spin);
  }
  QuadratureSpec quad;
  const int dim_g = kind == "u1" ? 1 : 3;
  bool monte_carlo = (max_n - 1) * dim_g > 2;
  Json q = d.contains("quadrature") ? d.at("quadrature") : Json::object();
  only_keys(q, {"scheme", "K", "N", "seed", "batches"}, "group.quadrature");
  const std::string scheme = get_or<std::string>(q, "scheme", monte_carlo ? "montecarlo" : "equispaced");
  if (scheme == "montecarlo") {
    quad.scheme = QuadratureScheme::MonteCarlo;
    monte_carlo = true;
  } else if (scheme != "equispaced") {
    config_error("quadrature scheme must be equispaced or montecarlo");
  }
  quad.nodes = get_or<int>(q, "K", quad.nodes);
  quad.samples = get_or<int>(q, "N", quad.samples);
  quad.batches = get_or<int>(q, "batches", quad.batches);
  bool found = false;
  quad.seed = resolve_seed(q, config, found);
  if (monte_carlo && !found) config_error("Monte Carlo integration needs a seed (quadrature.seed, config seed or --seed)");
  LieGroupRep lie = make_lie_group(kind == "u1" ? LieKind::U1 : LieKind::SU2, std::move(gens), quad);
  g.lie_group = sites == 1 ? lie : tensor_power(lie, sites);
  if (monte_carlo) g.descriptor += " seed=" + std::to_string(quad.seed);
  return g;
}

AsymmetryOptions asymmetry_options(const ExperimentConfig& config) {
  AsymmetryOptions o;
  o.term_cap = config.tol.term_cap;
  o.threads = config.threads;
  o.clustering_tol = config.tol.clustering;
  o.quadrature_rel_tol = config.tol.quadrature_rel;
  o.max_nodes_1d = config.tol.max_nodes_1d;
  o.max_nodes_2d = config.tol.max_nodes_2d;
  o.mc_max_rel_err = config.tol.mc_max_rel_err;
  return o;
}

}  // namespace asymkit::cli
