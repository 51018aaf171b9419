/**
 * @file penalty.hpp
 * @brief Block-resampling penalties.
 *
 * For exchangeable weights W_0..W_{p-1} with mean Wbar,
 *
 *   pen_W(m, C) = C E_W[ 2 (P_A^W - Wbar P_A)(s_hat^W) ]
 *               = 2 C / C_W * p_W(m),
 *
 *   p_W(m) = 1/(p(p-1)) sum_lambda sum_i (L_q psi_lambda(A_i) - P_A psi_lambda)^2,
 *
 * with C_W = 1 / Var(W_1 - Wbar). p_W does not depend on the weight law; the
 * law enters only through C_W. The Monte-Carlo route averages the defining
 * expectation over B weight draws and exists to check the closed form.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsel/basis.hpp"
#include "mixsel/blocks.hpp"
#include "mixsel/estimator.hpp"
#include "mixsel/random.hpp"
#include "mixsel/true_density.hpp"

namespace mixsel {

enum class WeightKind { multinomial, poisson, exponential, point_mass };

inline std::string_view to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::multinomial: return "multinomial";
    case WeightKind::poisson: return "poisson";
    case WeightKind::exponential: return "exponential";
    case WeightKind::point_mass: return "point-mass";
  }
  return "unknown";
}

inline WeightKind parse_weight_kind(std::string_view name) {
  if (name == "multinomial" || name == "block-bootstrap") return WeightKind::multinomial;
  if (name == "poisson") return WeightKind::poisson;
  if (name == "exponential") return WeightKind::exponential;
  if (name == "point-mass") return WeightKind::point_mass;
  throw std::invalid_argument("unknown weight law '" + std::string(name) + "'");
}

/// Exchangeable nonnegative block weights.
class WeightLaw {
 public:
  /// Block bootstrap: (W_0..W_{p-1}) ~ Multinomial(p; 1/p, ..., 1/p).
  static WeightLaw multinomial(std::size_t p) { return {WeightKind::multinomial, p, 0.0}; }
  /// I.i.d. Poisson(mean) weights.
  static WeightLaw iid_poisson(std::size_t p, double mean = 1.0) {
    if (!(mean > 0.0)) throw std::invalid_argument("poisson weight mean must be > 0");
    return {WeightKind::poisson, p, mean};
  }
  /// I.i.d. Exponential(rate) weights.
  static WeightLaw iid_exponential(std::size_t p, double rate = 1.0) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential weight rate must be > 0");
    return {WeightKind::exponential, p, rate};
  }
  /// W_i == value almost surely. Degenerate; rejected by every penalty routine.
  static WeightLaw point_mass(std::size_t p, double value = 1.0) {
    if (value < 0.0) throw std::invalid_argument("weights must be nonnegative");
    return {WeightKind::point_mass, p, value};
  }
  static WeightLaw make(WeightKind kind, std::size_t p, double parameter = 1.0) {
    switch (kind) {
      case WeightKind::multinomial: return multinomial(p);
      case WeightKind::poisson: return iid_poisson(p, parameter);
      case WeightKind::exponential: return iid_exponential(p, parameter);
      case WeightKind::point_mass: return point_mass(p, parameter);
    }
    throw std::invalid_argument("unknown weight law");
  }

  WeightKind kind() const { return kind_; }
  std::size_t p() const { return p_; }
  double parameter() const { return parameter_; }

  /// Variance of one i.i.d. weight; not meaningful for the multinomial law.
  double iid_variance() const {
    switch (kind_) {
      case WeightKind::poisson: return parameter_;
      case WeightKind::exponential: return 1.0 / (parameter_ * parameter_);
      case WeightKind::point_mass: return 0.0;
      case WeightKind::multinomial: break;
    }
    throw std::logic_error("multinomial weights are not i.i.d.");
  }

  /// Fills @p out (size p) with one draw. Multinomial draws use sequential
  /// binomial thinning.
  void draw(Engine& engine, std::span<double> out) const {
    if (out.size() != p_) throw std::invalid_argument("weight buffer size mismatch");
    switch (kind_) {
      case WeightKind::multinomial: {
        std::uint64_t remaining = p_;
        for (std::size_t i = 0; i + 1 < p_; ++i) {
          const double prob = 1.0 / static_cast<double>(p_ - i);
          std::binomial_distribution<std::uint64_t> bin(remaining, prob);
          const std::uint64_t w = remaining == 0 ? 0 : bin(engine);
          out[i] = static_cast<double>(w);
          remaining -= w;
        }
        out[p_ - 1] = static_cast<double>(remaining);
        break;
      }
      case WeightKind::poisson: {
        std::poisson_distribution<std::uint64_t> dist(parameter_);
        for (auto& w : out) w = static_cast<double>(dist(engine));
        break;
      }
      case WeightKind::exponential: {
        std::exponential_distribution<double> dist(parameter_);
        for (auto& w : out) w = dist(engine);
        break;
      }
      case WeightKind::point_mass:
        for (auto& w : out) w = parameter_;
        break;
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"kind", std::string(to_string(kind_))}, {"p", p_}};
    if (kind_ != WeightKind::multinomial) j["parameter"] = parameter_;
    return j;
  }

 private:
  WeightLaw(WeightKind kind, std::size_t p, double parameter)
      : kind_(kind), p_(p), parameter_(parameter) {
    if (p < 2) throw std::invalid_argument("weight laws need p >= 2");
  }

  WeightKind kind_;
  std::size_t p_;
  double parameter_;
};

/// C_W = Var(W_1 - Wbar)^{-1}.
inline double c_tilde_w(const WeightLaw& law) {
  const auto p = static_cast<double>(law.p());
  if (law.kind() == WeightKind::multinomial) return p / (p - 1.0);
  const double sigma2 = law.iid_variance();
  if (!(sigma2 > 0.0)) throw std::invalid_argument("degenerate weight law (zero variance)");
  return 1.0 / (sigma2 * (1.0 - 1.0 / p));
}

enum class PenaltyMethod { closed_form, monte_carlo };

inline std::string_view to_string(PenaltyMethod m) {
  return m == PenaltyMethod::closed_form ? "closed" : "monte-carlo";
}

inline PenaltyMethod parse_penalty_method(std::string_view name) {
  if (name == "closed" || name == "closed-form") return PenaltyMethod::closed_form;
  if (name == "monte-carlo" || name == "mc") return PenaltyMethod::monte_carlo;
  throw std::invalid_argument("unknown penalty method '" + std::string(name) + "'");
}

struct PenaltyRecord {
  std::size_t model_index = 0;
  std::size_t dim = 0;
  double p_w = 0.0;
  double C = 0.0;
  double pen = 0.0;
  PenaltyMethod method = PenaltyMethod::closed_form;
  /// Monte-Carlo only.
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  double standard_error = 0.0;
};

/// p_W from the across-block centered sums of squares of the first @p dim positions.
inline double p_w_from_statistics(const BlockStatistics& stats, std::size_t dim) {
  if (stats.p < 2) throw std::invalid_argument("p_W requires p >= 2");
  double ss = 0.0;
  for (std::size_t k = 0; k < dim; ++k) ss += stats.centered_ss[k];
  const auto p = static_cast<double>(stats.p);
  return ss / (p * (p - 1.0));
}

inline PenaltyRecord penalty_closed_form(const BlockedSample& sample, const Model& model,
                                         const WeightLaw& law, double C) {
  if (sample.scheme().p < 2) throw std::invalid_argument("closed-form penalty requires p >= 2");
  if (law.p() != sample.scheme().p) throw std::invalid_argument("weight law p does not match the block scheme");
  const double ctw = c_tilde_w(law);
  const auto stats = block_statistics(sample, model);
  PenaltyRecord rec;
  rec.model_index = model.index();
  rec.dim = model.dimension();
  rec.p_w = p_w_from_statistics(stats, rec.dim);
  rec.C = C;
  rec.pen = 2.0 * C * rec.p_w / ctw;
  rec.method = PenaltyMethod::closed_form;
  return rec;
}

/// Average of 2C (P_A^W - Wbar P_A)(s_hat^W) over B weight draws.
inline PenaltyRecord penalty_monte_carlo(const BlockedSample& sample, const Model& model,
                                         const WeightLaw& law, double C, std::size_t B,
                                         std::uint64_t seed) {
  const auto& scheme = sample.scheme();
  if (B < 1) throw std::invalid_argument("Monte-Carlo penalty requires B >= 1");
  if (law.p() != scheme.p) throw std::invalid_argument("weight law p does not match the block scheme");
  const double ctw = c_tilde_w(law);  // rejects degenerate laws
  const std::size_t p = scheme.p;
  const std::size_t dim = model.dimension();
  auto table = block_mean_matrix(sample, model);
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < dim; ++k) mean[k] += table[i * dim + k];
  for (auto& m : mean) m /= static_cast<double>(p);

  // Centered rows give nu_A^W exactly 0 when all blocks agree.
  std::vector<double> centered(table.size());
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < dim; ++k) centered[i * dim + k] = table[i * dim + k] - mean[k];

  Engine engine(seed);
  std::vector<double> w(p);
  std::vector<double> nu(dim);
  std::vector<double> resampled(dim);
  double sum = 0.0;
  double sum_sq = 0.0;
  const double inv_p = 1.0 / static_cast<double>(p);
  for (std::size_t b = 0; b < B; ++b) {
    law.draw(engine, w);
    double wbar = 0.0;
    for (double v : w) wbar += v;
    wbar *= inv_p;
    std::fill(nu.begin(), nu.end(), 0.0);
    std::fill(resampled.begin(), resampled.end(), 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      const double wi = w[i];
      const double dev = wi - wbar;
      const double* crow = centered.data() + i * dim;
      const double* row = table.data() + i * dim;
      for (std::size_t k = 0; k < dim; ++k) {
        nu[k] += dev * crow[k];
        resampled[k] += wi * row[k];
      }
    }
    double value = 0.0;
    for (std::size_t k = 0; k < dim; ++k) value += (nu[k] * inv_p) * (resampled[k] * inv_p);
    value *= 2.0 * C;
    sum += value;
    sum_sq += value * value;
  }
  const auto bd = static_cast<double>(B);
  const double mean_pen = sum / bd;
  const double var = B > 1 ? std::max(0.0, (sum_sq - bd * mean_pen * mean_pen) / (bd - 1.0)) : 0.0;

  PenaltyRecord rec;
  rec.model_index = model.index();
  rec.dim = dim;
  rec.C = C;
  rec.pen = mean_pen;
  rec.p_w = C != 0.0 ? mean_pen * ctw / (2.0 * C) : 0.0;
  rec.method = PenaltyMethod::monte_carlo;
  rec.replicates = B;
  rec.seed = seed;
  rec.standard_error = std::sqrt(var / bd);
  return rec;
}

/// 2 (P_A - P)(s_hat) = 2 sum_lambda a_lambda (a_lambda - <s, psi_lambda>). Diagnostic only.
inline double ideal_penalty_from_coefficients(const std::vector<double>& fitted,
                                              const std::vector<double>& truth, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t k = 0; k < dim; ++k) acc += fitted[k] * (fitted[k] - truth[k]);
  return 2.0 * acc;
}

inline double ideal_penalty(const BlockedSample& sample, const Model& model, const TrueDensity& truth) {
  const auto fit = project(sample, model);
  return ideal_penalty_from_coefficients(fit.coefficients, truth.coefficients(model), model.dimension());
}

}  // namespace mixsel
