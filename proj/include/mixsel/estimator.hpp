#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mixsel/basis.hpp"
#include "mixsel/blocks.hpp"
#include "mixsel/true_density.hpp"

namespace mixsel {

/// Projection estimator sum_lambda a_lambda psi_lambda with a_lambda = P_A psi_lambda.
struct ProjectionFit {
  Model model;
  std::vector<double> coefficients;
  /// ||s_hat||^2 - 2 P_A s_hat, equal to -sum a_lambda^2.
  double contrast = 0.0;
};

inline double sum_of_squares(const std::vector<double>& v, std::size_t count) {
  double acc = 0.0;
  for (std::size_t k = 0; k < count; ++k) acc += v[k] * v[k];
  return acc;
}

inline ProjectionFit make_fit(const Model& model, std::vector<double> coefficients) {
  if (coefficients.size() != model.dimension())
    throw std::invalid_argument("coefficient count does not match model dimension");
  const double contrast = -sum_of_squares(coefficients, coefficients.size());
  return {model, std::move(coefficients), contrast};
}

inline ProjectionFit project(const BlockedSample& sample, const Model& model) {
  return make_fit(model, block_statistics(sample, model).mean);
}

inline double evaluate_density(const ProjectionFit& fit, double x) {
  double acc = 0.0;
  for_each_nonzero(fit.model, x, [&](std::size_t pos, double v) { acc += fit.coefficients[pos] * v; });
  return acc;
}

/// Exact L2 risk of a fit, split into squared bias ||s - s_m||^2 and the
/// stochastic part p(m) = ||s_m - s_hat||^2.
struct RiskReport {
  Model model;
  double bias = 0.0;
  double variance = 0.0;
  double total = 0.0;
};

/// @p truth_coefficients are <s, psi_pos> for the fit's positions (or a longer
/// prefix-compatible vector) and @p squared_norm is ||s||^2.
inline RiskReport risk_from_coefficients(const ProjectionFit& fit,
                                         const std::vector<double>& truth_coefficients,
                                         double squared_norm) {
  const std::size_t dim = fit.coefficients.size();
  if (truth_coefficients.size() < dim)
    throw std::invalid_argument("truth coefficients shorter than the model");
  double projected = 0.0;
  double cross = 0.0;
  double fitted = 0.0;
  double deviation = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double a = fit.coefficients[k];
    const double c = truth_coefficients[k];
    projected += c * c;
    cross += a * c;
    fitted += a * a;
    deviation += (a - c) * (a - c);
  }
  RiskReport out{fit.model, std::max(0.0, squared_norm - projected), deviation, 0.0};
  // ||s - s_hat||^2 = ||s||^2 - 2<s, s_hat> + ||s_hat||^2
  out.total = std::max(0.0, squared_norm - 2.0 * cross + fitted);
  return out;
}

inline RiskReport risk_against(const ProjectionFit& fit, const TrueDensity& truth) {
  return risk_from_coefficients(fit, truth.coefficients(fit.model), truth.squared_norm());
}

}  // namespace mixsel
