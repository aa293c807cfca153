#pragma once

// JSON and CSV serialization of tensors, reports and density matrices.
//
// MPS tensor JSON: {"d": d, "D": D, "data": [[[re, im], ...] per s]} with data[s][a*D + b].
// Matrices are arrays of rows, each entry [re, im].

#include <string>

#include "json.hpp"

#include "asymkit/moments.hpp"
#include "asymkit/mps.hpp"
#include "asymkit/oracle.hpp"

namespace asymkit {

using Json = nlohmann::json;

/// Shortest round-trippable text (17 significant digits).
std::string format_double(double v);

Json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const Json& j);

Json mps_to_json(const MpsTensor& t);
MpsTensor mps_from_json(const Json& j);

Json density_matrix_to_json(const DensityMatrix& rho);
DensityMatrix density_matrix_from_json(const Json& j);

Json fit_to_json(const FitResult& fit);
Json report_to_json(const AsymmetryReport& report);

/// Header "ell,n,delta_s,mc_std_err", rows sorted by ell; mc_std_err empty when exact.
std::string report_csv(const AsymmetryReport& report);
std::string csv_header();
std::string report_csv_rows(const AsymmetryReport& report);

std::string to_string(FitModel model);

}  // namespace asymkit
