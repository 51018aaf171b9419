/**
 * @file true_density.hpp
 * @brief Analytically known marginal densities on [0,1).
 *
 * A TrueDensity is a piecewise polynomial s on [0,1) with exact CDF, a
 * safeguarded-Newton inverse CDF, exact ||s||^2 and the coefficient oracle
 * <s, psi_lambda>. Histogram and Haar coefficients are CDF differences and
 * therefore exact; Fourier coefficients use composite Gauss-Legendre
 * quadrature refined until two successive panel counts agree to 1e-10.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsel/basis.hpp"

namespace mixsel {

namespace detail {

/// Gauss-Legendre nodes/weights on [-1,1].
template <std::size_t N>
struct GaussLegendre {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendre() {
    for (std::size_t i = 0; i < N; ++i) {
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                          (static_cast<double>(N) + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = p2;
        }
        dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

inline const GaussLegendre<20>& gauss_legendre20() {
  static const GaussLegendre<20> rule;
  return rule;
}

inline double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

inline std::vector<double> antiderivative(const std::vector<double>& c) {
  std::vector<double> out(c.size() + 1, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) out[k + 1] = c[k] / static_cast<double>(k + 1);
  return out;
}

inline std::vector<double> square(const std::vector<double>& c) {
  if (c.empty()) return {};
  std::vector<double> out(2 * c.size() - 1, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out[i + j] += c[i] * c[j];
  return out;
}

}  // namespace detail

class TrueDensity {
 public:
  /// Pieces [breakpoints[i], breakpoints[i+1]) with polynomial coefficients in
  /// powers of the global variable x (constant term first).
  TrueDensity(std::string name, std::vector<double> breakpoints,
              std::vector<std::vector<double>> coefficients)
      : name_(std::move(name)), breaks_(std::move(breakpoints)), coeffs_(std::move(coefficients)) {
    validate();
    build_tables();
  }

  static TrueDensity uniform() { return TrueDensity("uniform", {0.0, 1.0}, {{1.0}}); }
  /// s(y) = 2y.
  static TrueDensity linear() { return TrueDensity("linear", {0.0, 1.0}, {{0.0, 2.0}}); }

  const std::string& name() const { return name_; }
  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<std::vector<double>>& coefficients() const { return coeffs_; }

  double operator()(double x) const {
    if (x < 0.0 || x >= 1.0) return 0.0;
    return detail::horner(coeffs_[piece_of(x)], x);
  }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const std::size_t i = piece_of(x);
    return cumulative_[i] + detail::horner(primitives_[i], x) - primitive_at_left_[i];
  }

  /// Mass of [a,b] under s.
  double mass(double a, double b) const { return cdf(b) - cdf(a); }

  /// Right inverse of the CDF; maps [0,1) into [0,1).
  double inverse_cdf(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("inverse_cdf argument outside [0,1]");
    constexpr double kBelowOne = 0x1.fffffffffffffp-1;
    std::size_t i = 0;
    while (i + 1 < coeffs_.size() && cumulative_[i + 1] <= u) ++i;
    while (i + 1 < coeffs_.size() && piece_mass(i) <= 0.0) ++i;
    double lo = breaks_[i];
    double hi = breaks_[i + 1];
    const double target = u - cumulative_[i] + primitive_at_left_[i];
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double g = detail::horner(primitives_[i], x) - target;
      if (g == 0.0) break;
      if (g > 0.0) hi = x; else lo = x;
      const double slope = detail::horner(coeffs_[i], x);
      double next = slope > 0.0 ? x - g / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) <= 1e-16 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-16) {
        x = next;
        break;
      }
      x = next;
    }
    return std::clamp(x, 0.0, kBelowOne);
  }

  /// ||s||^2, exact.
  double squared_norm() const { return squared_norm_; }

  /// <s, psi_pos> for every basis position of @p model.
  std::vector<double> coefficients(const Model& model) const {
    std::vector<double> out(model.dimension(), 0.0);
    switch (model.kind()) {
      case CollectionKind::histogram: {
        const int d = model.size();
        const double amp = std::sqrt(static_cast<double>(d));
        for (int k = 0; k < d; ++k)
          out[static_cast<std::size_t>(k)] = amp * mass(static_cast<double>(k) / d,
                                                        static_cast<double>(k + 1) / d);
        break;
      }
      case CollectionKind::haar: {
        out[0] = std::numbers::sqrt2 * mass(0.0, 0.5);
        out[1] = std::numbers::sqrt2 * mass(0.5, 1.0);
        for (int j = 1; j <= model.size(); ++j) {
          const double width = std::ldexp(1.0, -j);
          const double amp = std::sqrt(std::ldexp(1.0, j));
          for (int k = 0; k < (1 << j); ++k) {
            const double a = k * width;
            out[(std::size_t{1} << j) + static_cast<std::size_t>(k)] =
                amp * (mass(a, a + 0.5 * width) - mass(a + 0.5 * width, a + width));
          }
        }
        break;
      }
      case CollectionKind::fourier: {
        out[0] = 1.0;
        for (int k = 1; k <= model.size(); ++k) {
          out[static_cast<std::size_t>(2 * k - 1)] = std::numbers::sqrt2 * trig_moment(k, false);
          out[static_cast<std::size_t>(2 * k)] = std::numbers::sqrt2 * trig_moment(k, true);
        }
        break;
      }
    }
    return out;
  }

  nlohmann::json to_json() const {
    if (name_ == "uniform" || name_ == "linear") return {{"kind", name_}};
    return {{"kind", "piecewise-polynomial"}, {"breakpoints", breaks_}, {"coefficients", coeffs_}};
  }

  static TrueDensity from_json(const nlohmann::json& j) {
    if (j.is_string()) return from_json(nlohmann::json{{"kind", j.get<std::string>()}});
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "uniform") return uniform();
    if (kind == "linear") return linear();
    if (kind == "piecewise-polynomial") {
      return TrueDensity("piecewise-polynomial", j.at("breakpoints").get<std::vector<double>>(),
                         j.at("coefficients").get<std::vector<std::vector<double>>>());
    }
    throw std::invalid_argument("unknown target density '" + kind + "'");
  }

 private:
  void validate() const {
    if (breaks_.size() < 2 || coeffs_.size() != breaks_.size() - 1)
      throw std::invalid_argument("density needs k+1 breakpoints for k pieces");
    if (breaks_.front() != 0.0 || breaks_.back() != 1.0)
      throw std::invalid_argument("density breakpoints must span [0,1]");
    for (std::size_t i = 0; i + 1 < breaks_.size(); ++i) {
      if (!(breaks_[i] < breaks_[i + 1]))
        throw std::invalid_argument("density breakpoints must be increasing");
      if (coeffs_[i].empty()) throw std::invalid_argument("empty polynomial piece");
      constexpr int kChecks = 256;
      for (int t = 0; t <= kChecks; ++t) {
        const double x = breaks_[i] + (breaks_[i + 1] - breaks_[i]) * t / kChecks;
        if (detail::horner(coeffs_[i], x) < -1e-12)
          throw std::invalid_argument("density is negative on [0,1)");
      }
    }
  }

  void build_tables() {
    const std::size_t pieces = coeffs_.size();
    primitives_.resize(pieces);
    primitive_at_left_.resize(pieces);
    cumulative_.assign(pieces + 1, 0.0);
    squared_norm_ = 0.0;
    for (std::size_t i = 0; i < pieces; ++i) {
      primitives_[i] = detail::antiderivative(coeffs_[i]);
      primitive_at_left_[i] = detail::horner(primitives_[i], breaks_[i]);
      cumulative_[i + 1] = cumulative_[i] + piece_mass(i);
      const auto sq = detail::antiderivative(detail::square(coeffs_[i]));
      squared_norm_ += detail::horner(sq, breaks_[i + 1]) - detail::horner(sq, breaks_[i]);
    }
    if (std::abs(cumulative_.back() - 1.0) > 1e-12)
      throw std::invalid_argument("density does not integrate to 1");
  }

  double piece_mass(std::size_t i) const {
    return detail::horner(primitives_[i], breaks_[i + 1]) - primitive_at_left_[i];
  }

  std::size_t piece_of(double x) const {
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
    const auto idx = static_cast<std::size_t>(std::distance(breaks_.begin(), it));
    return std::min(idx == 0 ? 0 : idx - 1, coeffs_.size() - 1);
  }

  /// integral of s(x) cos(2 pi k x) (or sin) over [0,1).
  double trig_moment(int k, bool use_sin) const {
    const auto& rule = detail::gauss_legendre20();
    const double omega = 2.0 * std::numbers::pi * k;
    auto integrate = [&](std::size_t piece, std::size_t panels) {
      const double a = breaks_[piece];
      const double h = (breaks_[piece + 1] - a) / static_cast<double>(panels);
      double sum = 0.0;
      for (std::size_t p = 0; p < panels; ++p) {
        const double mid = a + (static_cast<double>(p) + 0.5) * h;
        double panel = 0.0;
        for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
          const double x = mid + 0.5 * h * rule.nodes[g];
          const double w = use_sin ? std::sin(omega * x) : std::cos(omega * x);
          panel += rule.weights[g] * detail::horner(coeffs_[piece], x) * w;
        }
        sum += 0.5 * h * panel;
      }
      return sum;
    };
    double total = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
      const double len = breaks_[i + 1] - breaks_[i];
      auto panels = static_cast<std::size_t>(std::ceil(2.0 * k * len)) + 1;
      double coarse = integrate(i, panels);
      bool converged = false;
      for (int refine = 0; refine < 12; ++refine) {
        panels *= 2;
        const double fine = integrate(i, panels);
        if (std::abs(fine - coarse) <= 1e-10) {
          coarse = fine;
          converged = true;
          break;
        }
        coarse = fine;
      }
      if (!converged) throw std::runtime_error("Fourier coefficient quadrature did not converge");
      total += coarse;
    }
    return total;
  }

  std::string name_;
  std::vector<double> breaks_;
  std::vector<std::vector<double>> coeffs_;
  std::vector<std::vector<double>> primitives_;
  std::vector<double> primitive_at_left_;
  std::vector<double> cumulative_;
  double squared_norm_ = 0.0;
};

}  // namespace mixsel
