#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "asymkit/checks.hpp"
#include "asymkit/error.hpp"
#include "cli.hpp"

namespace asymkit::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kClusteringText =
    "The state is not clustering: the leading eigenvalue of its transfer operator is degenerate, so\n"
    "distant regions stay correlated and rho_A is a mixture of macroscopically distinct branches.\n"
    "The asymptotic formulas (Delta S_n -> log(|G|/|H|) for finite groups, (dim g - dim h)/2 log ell\n"
    "for Lie groups) are derived under clustering and fail here: GHZ(p) with the spin flip has\n"
    "Delta S_n = 0 at p = 1/2, not log 2. Use `oracle-check` or the finite-chain oracle for such states.\n";

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

void setup_logging() {
  auto logger = spdlog::get("asymmetry_kit");
  if (!logger) logger = spdlog::stderr_logger_st("asymmetry_kit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("ASYMMETRY_KIT_LOG");
  const std::string level = env != nullptr ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("ASYMMETRY_KIT_LOG='{}' is not one of error, info, debug; using info", level);
  }
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    config_error("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::Config, "cannot write '" + tmp.string() + "'");
    out << text;
  }
  fs::rename(tmp, path);
}

std::string csv_number(double v) { return format_double(v); }

struct Row {
  int ell;
  int n;
  std::string text;
};

std::string rows_text(const std::vector<AsymmetryReport>& reports, const std::string& prefix, const std::string& suffix) {
  std::vector<Row> rows;
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.ell_grid.size(); ++i) {
      std::ostringstream line;
      line << prefix << r.ell_grid[i] << ',' << r.n << ',' << csv_number(r.delta_s[i]) << ',';
      if (r.mc_std_err) line << csv_number((*r.mc_std_err)[i]);
      line << suffix << '\n';
      rows.push_back({r.ell_grid[i], r.n, line.str()});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return std::tie(a.ell, a.n) < std::tie(b.ell, b.n); });
  std::string out;
  for (const auto& row : rows) out += row.text;
  return out;
}

FitResult run_fit(FitModel model, std::span<const int> ell, std::span<const double> values) {
  const std::vector<double> x(ell.begin(), ell.end());
  return model == FitModel::LogSlope ? fit_log_slope(x, values) : fit_exponential_to_constant(x, values);
}

std::vector<AsymmetryReport> evaluate(const MpsTensor& t, const GroupSpec& group, const ExperimentConfig& config) {
  if (group.dim() != t.phys_dim()) {
    config_error("group acts on dimension " + std::to_string(group.dim()) + " but the state has d = " +
                 std::to_string(t.phys_dim()) + " (set group.sites for blocked states)");
  }
  const AsymmetryOptions options = asymmetry_options(config);
  std::vector<AsymmetryReport> reports;
  for (int n : config.n_list) {
    spdlog::debug("evaluating n = {} over {} values of ell", n, config.ell_grid.size());
    AsymmetryReport r = group.finite ? asymmetry_finite_group(t, group.finite_group, n, config.ell_grid, options)
                                     : asymmetry_lie_group(t, group.lie_group, n, config.ell_grid, options);
    r.group_descriptor = group.descriptor;
    if (config.fit) {
      try {
        r.fit = run_fit(*config.fit, r.ell_grid, r.delta_s);
      } catch (const Error& e) {
        spdlog::warn("fit for n = {} skipped: {}", n, e.what());
      }
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

int max_replica(const ExperimentConfig& config) {
  return config.n_list.empty() ? 2 : *std::max_element(config.n_list.begin(), config.n_list.end());
}

int cmd_compute(const ExperimentConfig& config) {
  if (config.state.is_null()) config_error("compute needs a state descriptor");
  if (config.group.is_null()) config_error("compute needs a group descriptor");
  if (config.ell_grid.empty()) config_error("compute needs a non-empty ell grid");
  const GroupSpec group = build_group(config.group, config, max_replica(config));
  const MpsTensor t = build_state(config.state, config);
  spdlog::info("state d = {}, D = {}; group {}", t.phys_dim(), t.bond_dim(), group.descriptor);
  const auto reports = evaluate(t, group, config);

  const fs::path dir(config.out_dir);
  write_file(dir / (config.basename + ".csv"), csv_header() + rows_text(reports, "", ""));
  Json doc = {{"state", config.state},
              {"group", {{"descriptor", config.group}, {"summary", group.descriptor}}},
              {"tensor", {{"d", t.phys_dim()}, {"D", t.bond_dim()}}},
              {"tolerances", tolerances_to_json(config.tol)},
              {"reports", Json::array()}};
  if (config.seed) doc["seed"] = *config.seed;
  for (const auto& r : reports) doc["reports"].push_back(report_to_json(r));
  write_file(dir / (config.basename + ".json"), doc.dump(2) + "\n");
  for (const auto& r : reports) {
    spdlog::info("n = {}: Delta S at ell = {} is {}", r.n, r.ell_grid.back(), csv_number(r.delta_s.back()));
  }
  spdlog::info("wrote {} and {}", (dir / (config.basename + ".csv")).string(), (dir / (config.basename + ".json")).string());
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& config, std::optional<int> stop_after) {
  const Json& sw = config.sweep;
  if (!sw.is_object()) config_error("sweep needs a 'sweep' object with a 'delta' list");
  for (const auto& item : sw.items()) {
    const std::string& k = item.key();
    if (k != "delta" && k != "bond_dim" && k != "phase" && k != "energy_tol" && k != "schedule") {
      config_error("sweep: unknown key '" + k + "'");
    }
  }
  if (!sw.contains("delta") || !sw.at("delta").is_array()) config_error("sweep.delta must be a list");
  if (config.group.is_null()) config_error("sweep needs a group descriptor");
  std::vector<double> deltas;
  for (const auto& v : sw.at("delta")) {
    if (!v.is_number()) config_error("sweep.delta entries must be numbers");
    deltas.push_back(v.get<double>());
  }

  const fs::path dir(config.out_dir);
  const fs::path csv_path = dir / (config.basename + ".csv");
  const fs::path manifest_path = dir / (config.basename + ".manifest.json");
  const fs::path cell_dir = dir / (config.basename + ".cells");
  const std::string header = "delta,ell,n,delta_s,mc_std_err,status\n";
  fs::create_directories(cell_dir);

  Json canonical = {{"sweep", sw},
                    {"group", config.group},
                    {"n", config.n_list},
                    {"ell", config.ell_grid},
                    {"tolerances", tolerances_to_json(config.tol)}};
  if (config.seed) canonical["seed"] = *config.seed;
  Json manifest = {{"config", canonical}, {"completed", Json::object()}};
  if (fs::exists(manifest_path)) {
    const Json previous = read_json(manifest_path.string());
    if (previous.value("config", Json()) != canonical) {
      config_error("'" + manifest_path.string() + "' belongs to a different sweep configuration; remove it or use --out");
    }
    manifest = previous;
  }

  bool any_failed = false;
  int computed = 0;
  bool stopped = false;
  if (!deltas.empty() && !config.ell_grid.empty()) {
    const GroupSpec group = build_group(config.group, config, max_replica(config));
    for (double delta : deltas) {
      const std::string key = csv_number(delta);
      const fs::path cell = cell_dir / ("delta_" + key + ".csv");
      if (manifest["completed"].contains(key) && fs::exists(cell)) {
        spdlog::debug("delta = {} already complete", key);
        continue;
      }
      if (stop_after && computed >= *stop_after) {
        stopped = true;
        break;
      }
      std::string rows;
      try {
        Json state = {{"state", "xxz"}, {"delta", delta}};
        for (const char* k : {"bond_dim", "phase", "energy_tol", "schedule"}) {
          if (sw.contains(k)) state[k] = sw.at(k);
        }
        const MpsTensor t = build_state(state, config);
        spdlog::info("delta = {}: ground state D = {}", key, t.bond_dim());
        rows = rows_text(evaluate(t, group, config), key + ",", ",ok");
        manifest["completed"][key] = cell.filename().string();
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        spdlog::error("delta = {} failed: {}", key, e.what());
        any_failed = true;
        const std::string status = ",error:" + std::string(to_string(e.kind()));
        for (int ell : config.ell_grid) {
          for (int n : config.n_list) rows += key + "," + std::to_string(ell) + "," + std::to_string(n) + ",," + status + "\n";
        }
      }
      write_file(cell, rows);
      write_file(manifest_path, manifest.dump(2) + "\n");
      ++computed;
    }
  }

  std::string out = header;
  for (double delta : deltas) {
    const fs::path cell = cell_dir / ("delta_" + csv_number(delta) + ".csv");
    if (!fs::exists(cell)) continue;
    std::ifstream in(cell, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    out += text.str();
  }
  write_file(csv_path, out);
  write_file(manifest_path, manifest.dump(2) + "\n");
  if (stopped) spdlog::info("stopped after {} cells; run the same command again to resume", computed);
  spdlog::info("wrote {}", csv_path.string());
  return any_failed ? kExitNumerical : kExitOk;
}

struct Series {
  std::vector<int> ell;
  std::vector<double> values;
};

Series load_series(const std::string& path, std::optional<int> n, std::optional<double> delta) {
  Series s;
  if (fs::path(path).extension() == ".json") {
    const Json doc = read_json(path);
    const Json& reports = doc.contains("reports") ? doc.at("reports") : doc;
    const Json list = reports.is_array() ? reports : Json::array({reports});
    for (const auto& r : list) {
      if (n && r.at("n").get<int>() != *n) continue;
      s.ell = r.at("ell").get<std::vector<int>>();
      s.values = r.at("delta_s").get<std::vector<double>>();
      return s;
    }
    config_error("no report with the requested n in '" + path + "'");
  }
  std::ifstream in(path);
  if (!in) config_error("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> cols;
  {
    std::stringstream hs(line);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(cols.begin(), cols.end(), name);
    return it == cols.end() ? -1 : static_cast<int>(it - cols.begin());
  };
  const int c_ell = col("ell"), c_n = col("n"), c_val = col("delta_s"), c_delta = col("delta");
  if (c_ell < 0 || c_n < 0 || c_val < 0) config_error("'" + path + "' lacks ell, n or delta_s columns");
  std::optional<int> chosen_n = n;
  std::optional<std::string> chosen_delta;
  if (delta) chosen_delta = csv_number(*delta);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) f.push_back(c);
    f.resize(cols.size());
    if (c_delta >= 0) {
      if (!chosen_delta) chosen_delta = f[static_cast<std::size_t>(c_delta)];
      if (f[static_cast<std::size_t>(c_delta)] != *chosen_delta) continue;
    }
    const int row_n = std::stoi(f[static_cast<std::size_t>(c_n)]);
    if (!chosen_n) chosen_n = row_n;
    if (row_n != *chosen_n || f[static_cast<std::size_t>(c_val)].empty()) continue;
    s.ell.push_back(std::stoi(f[static_cast<std::size_t>(c_ell)]));
    s.values.push_back(std::stod(f[static_cast<std::size_t>(c_val)]));
  }
  return s;
}

int cmd_fit(const std::string& report, const std::string& model, std::optional<int> n, std::optional<double> delta,
            const std::optional<std::string>& out) {
  if (report.empty()) config_error("fit needs --report");
  const Series s = load_series(report, n, delta);
  const FitResult fit = run_fit(parse_fit_model(model), s.ell, s.values);
  const std::string text = fit_to_json(fit).dump(2) + "\n";
  std::cout << text;
  if (out) write_file(*out, text);
  return kExitOk;
}

void print_suite(const std::string& title, const CheckSummary& s, Json& doc) {
  Json cases = Json::array();
  for (const auto& c : s.cases) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << title << ": " << c.name << "  error=" << c.error
              << " tol=" << c.tolerance;
    if (!c.note.empty()) std::cout << "  (" << c.note << ")";
    std::cout << "\n";
    cases.push_back({{"name", c.name}, {"passed", c.passed}, {"error", c.error}, {"tolerance", c.tolerance}, {"note", c.note}});
  }
  std::cout << title << ": " << s.cases.size() - static_cast<std::size_t>(s.failures()) << "/" << s.cases.size()
            << " passed, max error " << s.max_error() << "\n";
  doc[title] = {{"passed", s.passed()}, {"max_error", s.max_error()}, {"cases", cases}};
}

int cmd_oracle_check(const std::string& suite, std::optional<int> cases, const ExperimentConfig& config, int length,
                     bool write_report) {
  if (suite != "moments" && suite != "symmetrization" && suite != "all") {
    config_error("--suite must be moments, symmetrization or all");
  }
  const std::uint64_t seed = config.seed.value_or(1);
  Json doc = Json::object();
  bool ok = true;
  if (suite != "symmetrization") {
    MomentSuiteOptions o;
    o.seed = seed;
    o.length = length;
    if (cases) o.cases = *cases;
    const auto s = moment_oracle_suite(o);
    print_suite("moments", s, doc);
    ok = ok && s.passed();
  }
  if (suite != "moments") {
    SymmetrizationSuiteOptions o;
    o.seed = seed;
    if (cases) o.cases = *cases;
    const auto s = symmetrization_suite(o);
    print_suite("symmetrization", s, doc);
    ok = ok && s.passed();
  }
  if (write_report) write_file(fs::path(config.out_dir) / "oracle_check.json", doc.dump(2) + "\n");
  return ok ? kExitOk : kExitNumerical;
}

int cmd_state_info(const ExperimentConfig& config) {
  if (config.state.is_null()) config_error("state-info needs a state descriptor (--state or --config)");
  const MpsTensor t = build_state(config.state, config);
  const ClusteringReport c = clustering_check(t, config.tol.clustering);
  Json info = {{"d", t.phys_dim()},
               {"D", t.bond_dim()},
               {"clustering",
                {{"is_clustering", c.is_clustering},
                 {"leading_modulus", c.leading_modulus},
                 {"subleading_modulus", c.subleading_modulus},
                 {"gap_ratio", c.gap_ratio},
                 {"correlation_length", std::isfinite(c.correlation_length) ? Json(c.correlation_length) : Json("inf")}}}};
  const CVector spectrum = eigenvalues_by_modulus(build_transfer_operator(t).matrix());
  Json moduli = Json::array();
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(spectrum.size(), 6); ++i) moduli.push_back(std::abs(spectrum[i]));
  info["transfer_moduli"] = moduli;
  if (c.is_clustering) info["renyi2_limit"] = renyi_entropy(t, 2, std::nullopt) + 0.0;
  if (!config.group.is_null()) {
    const GroupSpec g = build_group(config.group, config, max_replica(config));
    if (g.dim() != t.phys_dim()) config_error("group dimension does not match the state");
    if (g.finite) {
      const SubgroupInfo h = detect_invariant_subgroup(t, g.finite_group, 1e-8);
      info["group"] = {{"order", g.finite_group.order()},
                       {"subgroup", h.elements},
                       {"phases", h.phases},
                       {"predicted_plateau", std::log(static_cast<double>(g.finite_group.order()) / h.order())}};
    } else {
      const SubalgebraInfo h = detect_invariant_subalgebra(t, g.lie_group);
      info["group"] = {{"dim_g", g.lie_group.dim_g()},
                       {"dim_h", h.dim_h},
                       {"predicted_log_slope", 0.5 * (g.lie_group.dim_g() - h.dim_h)}};
    }
  }
  if (!c.is_clustering) info["note"] = "not clustering; the asymmetry pipeline refuses this state";
  std::cout << info.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"Entanglement asymmetry of uniform matrix product states"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> tols;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment configuration");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "global seed (overrides the file)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--tol", tols, "tolerance override key=value (repeatable)");
  };
  auto* compute = app.add_subcommand("compute", "Delta S_n over an ell grid; writes CSV and JSON reports");
  add_common(compute);
  auto* sweep = app.add_subcommand("sweep", "XXZ ground states over delta x ell x n; resumable");
  add_common(sweep);
  std::optional<int> stop_after;
  sweep->add_option("--stop-after", stop_after, "compute at most this many new cells, then stop");
  auto* fit = app.add_subcommand("fit", "fit a report column");
  std::string report_path;
  std::string model = "exponential_to_constant";
  std::optional<int> fit_n;
  std::optional<double> fit_delta;
  std::optional<std::string> fit_out;
  fit->add_option("--report", report_path, "report CSV or JSON")->required();
  fit->add_option("--model", model, "exponential_to_constant | log_slope");
  fit->add_option("--n", fit_n, "replica index to fit (default: first in file)");
  fit->add_option("--delta", fit_delta, "sweep CSVs: delta to fit (default: first in file)");
  fit->add_option("--out", fit_out, "also write the fit JSON here");
  auto* oracle = app.add_subcommand("oracle-check", "pipeline versus brute-force oracle suites");
  add_common(oracle);
  std::string suite = "all";
  std::optional<int> cases;
  int length = 30;
  oracle->add_option("--suite", suite, "moments | symmetrization | all");
  oracle->add_option("--cases", cases, "number of seeded cases per suite");
  oracle->add_option("--length", length, "oracle ring length")->check(CLI::Range(2, 64));
  auto* info = app.add_subcommand("state-info", "clustering report and detected invariant subgroup");
  add_common(info);
  std::string state_inline;
  std::string group_inline;
  info->add_option("--state", state_inline, "state descriptor as inline JSON");
  info->add_option("--group", group_inline, "group descriptor as inline JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (fit->parsed()) return cmd_fit(report_path, model, fit_n, fit_delta, fit_out);
    ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : parse_config(read_json(config_path));
    if (out_dir) config.out_dir = *out_dir;
    if (seed) {
      config.seed = seed;
      config.seed_from_flag = true;
    }
    if (threads) config.threads = *threads;
    for (const auto& t : tols) apply_tolerance(config.tol, t);
    if (compute->parsed()) {
      if (config_path.empty()) config_error("compute needs --config");
      return cmd_compute(config);
    }
    if (sweep->parsed()) {
      if (config_path.empty()) config_error("sweep needs --config");
      return cmd_sweep(config, stop_after);
    }
    if (oracle->parsed()) return cmd_oracle_check(suite, cases, config, length, out_dir.has_value());
    if (!state_inline.empty()) config.state = Json::parse(state_inline);
    if (!group_inline.empty()) config.group = Json::parse(group_inline);
    return cmd_state_info(config);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::Config:
      case ErrorKind::BadParam:
        spdlog::error("configuration error: {}", e.what());
        return kExitConfig;
      case ErrorKind::NonClustering:
      case ErrorKind::DegenerateLeading:
        spdlog::error("{}", e.what());
        std::cerr << kClusteringText;
        return kExitNonClustering;
      default:
        spdlog::error("numerical error: {}", e.what());
        return kExitNumerical;
    }
  } catch (const Json::exception& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  }
}

}  // namespace asymkit::cli
