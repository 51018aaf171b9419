/**
 * @file processes.hpp
 * @brief Stationary dependent sequences with a prescribed marginal on [0,1).
 *
 * Dependence lives in a latent chain with uniform marginal; the observed
 * sequence is its image through the inverse CDF of the target density.
 *
 *   iid           : U_t i.i.d. uniform
 *   ar-bernoulli  : U_t = (U_{t-1} + xi_t) / 2, xi_t ~ Bernoulli(1/2)
 *                   (tau-mixing, not beta-mixing)
 *   gaussian-ar1  : Z_t = a Z_{t-1} + eps_t, U_t = Phi(Z_t sqrt(1 - a^2))
 *                   (geometrically beta-mixing)
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsel/basis.hpp"
#include "mixsel/random.hpp"
#include "mixsel/true_density.hpp"

namespace mixsel {

enum class ProcessKind { iid, ar_bernoulli, gaussian_ar1 };

inline std::string_view to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::iid: return "iid";
    case ProcessKind::ar_bernoulli: return "ar-bernoulli";
    case ProcessKind::gaussian_ar1: return "gaussian-ar1";
  }
  return "unknown";
}

inline ProcessKind parse_process_kind(std::string_view name) {
  if (name == "iid") return ProcessKind::iid;
  if (name == "ar-bernoulli") return ProcessKind::ar_bernoulli;
  if (name == "gaussian-ar1") return ProcessKind::gaussian_ar1;
  throw std::invalid_argument("unknown process kind '" + std::string(name) + "'");
}

struct ProcessSpec {
  ProcessKind kind = ProcessKind::ar_bernoulli;
  TrueDensity target = TrueDensity::uniform();
  /// AR coefficient of the gaussian-ar1 chain.
  double ar_coefficient = 0.5;
  std::size_t burn_in = 1024;
  std::uint64_t seed = 0;

  void validate() const {
    if (kind == ProcessKind::gaussian_ar1 && !(std::abs(ar_coefficient) < 1.0))
      throw std::invalid_argument("gaussian-ar1 coefficient must satisfy |a| < 1");
    if (burn_in < 64) throw std::invalid_argument("burn-in must be >= 64");
  }

  nlohmann::json to_json() const {
    return {{"kind", std::string(to_string(kind))},
            {"target", target.to_json()},
            {"ar_coefficient", ar_coefficient},
            {"burn_in", burn_in},
            {"seed", seed}};
  }

  static ProcessSpec from_json(const nlohmann::json& j) {
    ProcessSpec spec;
    if (j.contains("kind")) spec.kind = parse_process_kind(j.at("kind").get<std::string>());
    if (j.contains("target")) spec.target = TrueDensity::from_json(j.at("target"));
    if (j.contains("ar_coefficient")) spec.ar_coefficient = j.at("ar_coefficient").get<double>();
    if (j.contains("burn_in")) spec.burn_in = j.at("burn_in").get<std::size_t>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
  }
};

/// One step of the Bernoulli autoregression.
inline double ar_bernoulli_step(double previous, int xi) { return 0.5 * (previous + xi); }

inline std::vector<double> ar_bernoulli_path(double start, std::span<const int> innovations) {
  std::vector<double> out;
  out.reserve(innovations.size());
  double x = start;
  for (int xi : innovations) {
    x = ar_bernoulli_step(x, xi);
    out.push_back(x);
  }
  return out;
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Latent chain with uniform marginal on [0,1), before the warp.
inline std::vector<double> simulate_latent(const ProcessSpec& spec, std::size_t n) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("simulate requires n >= 1");
  constexpr double kBelowOne = 0x1.fffffffffffffp-1;
  Engine engine(spec.seed);
  std::vector<double> out(n);
  switch (spec.kind) {
    case ProcessKind::iid:
      for (auto& u : out) u = uniform01(engine);
      break;
    case ProcessKind::ar_bernoulli: {
      double x = uniform01(engine);
      for (std::size_t t = 0; t < spec.burn_in; ++t) x = ar_bernoulli_step(x, static_cast<int>(engine() >> 63));
      for (auto& u : out) {
        x = ar_bernoulli_step(x, static_cast<int>(engine() >> 63));
        u = x;
      }
      break;
    }
    case ProcessKind::gaussian_ar1: {
      const double a = spec.ar_coefficient;
      const double scale = std::sqrt(1.0 - a * a);
      std::normal_distribution<double> normal(0.0, 1.0);
      double z = normal(engine) / scale;
      for (std::size_t t = 0; t < spec.burn_in; ++t) z = a * z + normal(engine);
      for (auto& u : out) {
        z = a * z + normal(engine);
        u = std::min(standard_normal_cdf(z * scale), kBelowOne);
      }
      break;
    }
  }
  return out;
}

/// n observations with marginal spec.target. Identical (spec, n) give identical output.
inline std::vector<double> simulate(const ProcessSpec& spec, std::size_t n) {
  auto out = simulate_latent(spec, n);
  if (spec.target.name() != "uniform")
    for (auto& x : out) x = spec.target.inverse_cdf(x);
  return out;
}

struct DamEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of D_{A,m} = q sum_lambda Var(L_q psi_lambda(A_0)) from
/// R independent stationary blocks of length q.
inline DamEstimate estimate_dam(const ProcessSpec& spec, const Model& model, std::size_t q,
                                std::size_t replications, std::uint64_t seed) {
  if (replications < 100) throw std::invalid_argument("estimate_dam requires R >= 100");
  if (q < 1) throw std::invalid_argument("block length q must be >= 1");
  const std::size_t dim = model.dimension();
  std::vector<double> table(replications * dim, 0.0);
  ProcessSpec block_spec = spec;
  for (std::size_t r = 0; r < replications; ++r) {
    block_spec.seed = derive_seed(seed, {r});
    const auto block = simulate(block_spec, q);
    double* row = table.data() + r * dim;
    for (double x : block) for_each_nonzero(model, x, [&](std::size_t pos, double v) { row[pos] += v; });
    for (std::size_t k = 0; k < dim; ++k) row[k] /= static_cast<double>(q);
  }
  const auto rd = static_cast<double>(replications);
  std::vector<double> mean(dim, 0.0);
  for (std::size_t r = 0; r < replications; ++r)
    for (std::size_t k = 0; k < dim; ++k) mean[k] += table[r * dim + k];
  for (auto& m : mean) m /= rd;

  // Z_r = q R/(R-1) sum_k (m_rk - mean_k)^2 averages to the unbiased estimate.
  const double factor = static_cast<double>(q) * rd / (rd - 1.0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t r = 0; r < replications; ++r) {
    double z = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double dev = table[r * dim + k] - mean[k];
      z += dev * dev;
    }
    z *= factor;
    sum += z;
    sum_sq += z * z;
  }
  const double value = sum / rd;
  const double var = std::max(0.0, (sum_sq - rd * value * value) / (rd - 1.0));
  return {value, std::sqrt(var / rd)};
}

}  // namespace mixsel
