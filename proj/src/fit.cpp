#include <algorithm>
#include <cmath>
#include <limits>

#include "asymkit/error.hpp"
#include "asymkit/moments.hpp"

namespace asymkit {

namespace {

constexpr std::size_t kMinPoints = 6;

void check_series(std::span<const double> ell, std::span<const double> values) {
  if (ell.size() != values.size()) throw Error(ErrorKind::ShapeMismatch, "ell and values differ in length");
  if (ell.size() < kMinPoints) throw Error(ErrorKind::FitIllConditioned, "fits need at least 6 data points");
  for (std::size_t i = 0; i < ell.size(); ++i) {
    if (!std::isfinite(ell[i]) || !std::isfinite(values[i])) {
      throw Error(ErrorKind::NonFinite, "fit data contains NaN or Inf");
    }
  }
}

struct LinearFit {
  double c = 0.0;
  double b = 0.0;
  double rss = 0.0;
};

// values ~ c - b r^ell for fixed r
LinearFit fit_fixed_rate(std::span<const double> ell, std::span<const double> values, double rate) {
  const auto count = static_cast<Eigen::Index>(ell.size());
  RMatrix design(count, 2);
  RVector rhs(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = -std::pow(rate, ell[static_cast<std::size_t>(i)]);
    rhs[i] = values[static_cast<std::size_t>(i)];
  }
  const RVector coef = design.colPivHouseholderQr().solve(rhs);
  return {coef[0], coef[1], (design * coef - rhs).squaredNorm()};
}

}  // namespace

FitResult fit_exponential_to_constant(std::span<const double> ell, std::span<const double> values) {
  check_series(ell, values);
  // profile the residual over r on a grid, then golden-section search around the best cell
  constexpr int kGrid = 999;
  double best_rate = 0.5;
  double best_rss = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= kGrid; ++k) {
    const double rate = k / (kGrid + 1.0);
    const double rss = fit_fixed_rate(ell, values, rate).rss;
    if (rss < best_rss) {
      best_rss = rss;
      best_rate = rate;
    }
  }
  double lo = std::max(best_rate - 1.0 / (kGrid + 1.0), 1e-6);
  double hi = std::min(best_rate + 1.0 / (kGrid + 1.0), 1.0 - 1e-9);
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80; ++it) {
    const double x1 = hi - golden * (hi - lo);
    const double x2 = lo + golden * (hi - lo);
    if (fit_fixed_rate(ell, values, x1).rss < fit_fixed_rate(ell, values, x2).rss) {
      hi = x2;
    } else {
      lo = x1;
    }
  }
  const double rate = 0.5 * (lo + hi);
  const LinearFit lin = fit_fixed_rate(ell, values, rate);
  FitResult fit;
  fit.model = FitModel::ExponentialToConstant;
  fit.constant = lin.c;
  fit.amplitude = lin.b;
  fit.rate = rate;
  fit.residual_rms = std::sqrt(lin.rss / static_cast<double>(ell.size()));
  fit.points = ell.size();
  return fit;
}

FitResult fit_log_slope(std::span<const double> ell, std::span<const double> values) {
  check_series(ell, values);
  const std::size_t start = ell.size() / 2;
  const auto count = static_cast<Eigen::Index>(ell.size() - start);
  RMatrix design(count, 2);
  RVector rhs(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double x = ell[start + static_cast<std::size_t>(i)];
    if (!(x > 0.0)) throw Error(ErrorKind::FitIllConditioned, "log-slope fits need positive ell");
    design(i, 0) = std::log(x);
    design(i, 1) = 1.0;
    rhs[i] = values[start + static_cast<std::size_t>(i)];
  }
  const RVector coef = design.colPivHouseholderQr().solve(rhs);
  FitResult fit;
  fit.model = FitModel::LogSlope;
  fit.slope = coef[0];
  fit.constant = coef[1];
  fit.residual_rms = std::sqrt((design * coef - rhs).squaredNorm() / static_cast<double>(count));
  fit.points = static_cast<std::size_t>(count);
  return fit;
}

}  // namespace asymkit
