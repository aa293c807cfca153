#include "asymkit/io.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "asymkit/error.hpp"

namespace asymkit {

namespace {

Json complex_to_json(cplx v) { return Json::array({v.real(), v.imag()}); }

cplx complex_from_json(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::Config, "complex entries must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json matrix_to_json(const CMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw Error(ErrorKind::Config, "matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorKind::Config, "matrix rows differ in length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = complex_from_json(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

Json mps_to_json(const MpsTensor& t) {
  Json data = Json::array();
  for (const auto& m : t.matrices()) {
    Json flat = Json::array();
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
      for (Eigen::Index b = 0; b < m.cols(); ++b) flat.push_back(complex_to_json(m(a, b)));
    }
    data.push_back(std::move(flat));
  }
  Json out = {{"d", t.phys_dim()}, {"D", t.bond_dim()}, {"data", std::move(data)}};
  if (t.boundary()) out["boundary"] = matrix_to_json(*t.boundary());
  return out;
}

MpsTensor mps_from_json(const Json& j) {
  try {
    const int d = j.at("d").get<int>();
    const int bond = j.at("D").get<int>();
    const Json& data = j.at("data");
    if (!data.is_array() || static_cast<int>(data.size()) != d) {
      throw Error(ErrorKind::ShapeMismatch, "data must hold one entry list per physical state");
    }
    std::vector<cplx> flat;
    for (const auto& per_s : data) {
      if (!per_s.is_array() || static_cast<int>(per_s.size()) != bond * bond) {
        throw Error(ErrorKind::ShapeMismatch, "each physical state needs D*D entries");
      }
      for (const auto& v : per_s) flat.push_back(complex_from_json(v));
    }
    MpsTensor t = MpsTensor::from_array(d, bond, flat);
    if (j.contains("boundary")) t = t.with_boundary(matrix_from_json(j.at("boundary")));
    return t;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed MPS JSON: ") + e.what());
  }
}

Json density_matrix_to_json(const DensityMatrix& rho) { return {{"dim", rho.dim()}, {"matrix", matrix_to_json(rho.matrix)}}; }

DensityMatrix density_matrix_from_json(const Json& j) {
  DensityMatrix rho{matrix_from_json(j.at("matrix"))};
  validate_density_matrix(rho);
  return rho;
}

std::string to_string(FitModel model) {
  switch (model) {
    case FitModel::ExponentialToConstant:
      return "exponential_to_constant";
    case FitModel::LogSlope:
      return "log_slope";
    case FitModel::ExponentialDecay:
      return "exponential_decay";
  }
  return "unknown";
}

Json fit_to_json(const FitResult& fit) {
  Json out = {{"model", to_string(fit.model)},
              {"constant", fit.constant},
              {"amplitude", fit.amplitude},
              {"rate", fit.rate},
              {"slope", fit.slope},
              {"residual_rms", fit.residual_rms},
              {"points", fit.points}};
  if (fit.reference_rate) out["reference_rate"] = *fit.reference_rate;
  if (fit.first_order_weight) out["first_order_weight"] = *fit.first_order_weight;
  return out;
}

Json report_to_json(const AsymmetryReport& report) {
  Json out = {{"n", report.n},
              {"group", report.group_descriptor},
              {"ell", report.ell_grid},
              {"delta_s", report.delta_s}};
  if (report.mc_std_err) out["mc_std_err"] = *report.mc_std_err;
  if (report.fit) out["fit"] = fit_to_json(*report.fit);
  if (report.seed) out["seed"] = *report.seed;
  if (!report.quadrature_nodes.empty()) out["quadrature_nodes"] = report.quadrature_nodes;
  return out;
}

std::string csv_header() { return "ell,n,delta_s,mc_std_err\n"; }

std::string report_csv_rows(const AsymmetryReport& report) {
  std::vector<std::size_t> idx(report.ell_grid.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return report.ell_grid[a] < report.ell_grid[b]; });
  std::ostringstream out;
  for (const auto i : idx) {
    out << report.ell_grid[i] << ',' << report.n << ',' << format_double(report.delta_s[i]) << ',';
    if (report.mc_std_err) out << format_double((*report.mc_std_err)[i]);
    out << '\n';
  }
  return out.str();
}

std::string report_csv(const AsymmetryReport& report) { return csv_header() + report_csv_rows(report); }

}  // namespace asymkit
