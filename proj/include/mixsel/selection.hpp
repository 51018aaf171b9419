/**
 * @file selection.hpp
 * @brief Penalized projection estimator: fit every model, penalize, select.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsel/basis.hpp"
#include "mixsel/blocks.hpp"
#include "mixsel/estimator.hpp"
#include "mixsel/penalty.hpp"
#include "mixsel/random.hpp"
#include "mixsel/true_density.hpp"

namespace mixsel {

struct CriterionRow {
  std::size_t model_index = 0;
  std::size_t dim = 0;
  double contrast = 0.0;
  double pen = 0.0;
  double p_w = 0.0;
  double standard_error = 0.0;
  std::optional<double> risk;
  std::optional<double> ideal_pen;

  double crit() const { return contrast + pen; }
};

struct SelectionReport {
  std::vector<CriterionRow> rows;
  /// Position of the selected row.
  std::size_t selected = 0;
  std::optional<std::size_t> oracle;
  std::optional<double> oracle_ratio;

  const CriterionRow& selected_row() const { return rows.at(selected); }

  nlohmann::json summary_json() const {
    nlohmann::json j{{"selected", rows.at(selected).model_index},
                     {"selected_dim", rows.at(selected).dim}};
    j["oracle"] = oracle ? nlohmann::json(rows.at(*oracle).model_index) : nlohmann::json(nullptr);
    j["oracle_dim"] = oracle ? nlohmann::json(rows.at(*oracle).dim) : nlohmann::json(nullptr);
    j["ratio"] = oracle_ratio ? nlohmann::json(*oracle_ratio) : nlohmann::json(nullptr);
    return j;
  }
};

/// True when row a is strictly preferred to row b for the value pair (va, vb):
/// smaller value, then smaller dimension, then smaller model index.
inline bool preferred(double va, const CriterionRow& a, double vb, const CriterionRow& b) {
  if (va != vb) return va < vb;
  if (a.dim != b.dim) return a.dim < b.dim;
  return a.model_index < b.model_index;
}

/// argmin over rows of value(row) with the tie-break of preferred().
template <typename ValueFn>
std::size_t argmin_rows(const std::vector<CriterionRow>& rows, ValueFn&& value) {
  if (rows.empty()) throw std::invalid_argument("selection needs at least one row");
  std::size_t best = 0;
  double best_value = value(rows[0]);
  if (std::isnan(best_value)) throw std::invalid_argument("NaN criterion value");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = value(rows[i]);
    if (std::isnan(v)) throw std::invalid_argument("NaN criterion value");
    if (preferred(v, rows[i], best_value, rows[best])) {
      best = i;
      best_value = v;
    }
  }
  return best;
}

/// Attaches the oracle model and ratio when every row carries a risk.
inline void attach_oracle(SelectionReport& report) {
  for (const auto& r : report.rows)
    if (!r.risk) return;
  const std::size_t oracle = argmin_rows(report.rows, [](const CriterionRow& r) { return *r.risk; });
  report.oracle = oracle;
  const double best = *report.rows[oracle].risk;
  const double chosen = *report.rows[report.selected].risk;
  if (best > 0.0) report.oracle_ratio = chosen / best;
  else report.oracle_ratio = chosen > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

/// m_hat = argmin(contrast + pen); ties go to the smaller dimension, then the
/// smaller model index.
inline SelectionReport select_model(std::vector<CriterionRow> rows) {
  for (const auto& r : rows)
    if (!std::isfinite(r.contrast) || !std::isfinite(r.pen))
      throw std::invalid_argument("non-finite criterion value");
  SelectionReport report;
  report.selected = argmin_rows(rows, [](const CriterionRow& r) { return r.crit(); });
  report.rows = std::move(rows);
  attach_oracle(report);
  return report;
}

struct PenaltyConfig {
  WeightKind weight = WeightKind::multinomial;
  double weight_parameter = 1.0;
  /// C = multiplier * C_W unless an explicit constant is given.
  double multiplier = 1.0;
  std::optional<double> constant;
  PenaltyMethod method = PenaltyMethod::closed_form;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;

  WeightLaw law(std::size_t p) const { return WeightLaw::make(weight, p, weight_parameter); }
  double constant_for(const WeightLaw& law) const { return constant.value_or(multiplier * c_tilde_w(law)); }

  nlohmann::json to_json() const {
    nlohmann::json j{{"weight", std::string(to_string(weight))},
                     {"weight_parameter", weight_parameter},
                     {"multiplier", multiplier},
                     {"method", std::string(to_string(method))},
                     {"replicates", replicates},
                     {"seed", seed}};
    j["constant"] = constant ? nlohmann::json(*constant) : nlohmann::json(nullptr);
    return j;
  }
};

/// <s, psi> for a collection, computed once and reused across replications.
struct OracleTable {
  double squared_norm = 0.0;
  /// One vector per model; nested collections share the largest model's.
  std::vector<std::vector<double>> coefficients;
  bool shared = false;

  const std::vector<double>& for_model(std::size_t position) const {
    return shared ? coefficients.front() : coefficients.at(position);
  }
};

inline OracleTable make_oracle_table(const TrueDensity& truth, const ModelCollection& collection) {
  OracleTable table;
  table.squared_norm = truth.squared_norm();
  if (collection.models.empty()) return table;
  if (collection.spans_nested()) {
    table.shared = true;
    table.coefficients.push_back(truth.coefficients(collection.largest()));
  } else {
    for (const auto& m : collection.models) table.coefficients.push_back(truth.coefficients(m));
  }
  return table;
}

/// Per-model fit summary shared by PPE and the slope algorithm.
struct ModelSummary {
  std::size_t model_index = 0;
  std::size_t dim = 0;
  double contrast = 0.0;
  double p_w = 0.0;
  std::optional<double> risk;
  std::optional<double> bias;
  std::optional<double> variance;
  std::optional<double> ideal_pen;
};

/// Fits every model of the collection. Nested collections are computed from
/// the largest model's block statistics by prefix sums.
inline std::vector<ModelSummary> summarize_collection(const BlockedSample& sample,
                                                      const ModelCollection& collection,
                                                      const OracleTable* oracle = nullptr) {
  std::vector<ModelSummary> out;
  out.reserve(collection.models.size());
  const auto p = static_cast<double>(sample.scheme().p);
  if (sample.scheme().p < 2) throw std::invalid_argument("selection requires p >= 2 blocks");

  auto summarize = [&](const Model& model, const BlockStatistics& stats,
                       const std::vector<double>* truth) {
    const std::size_t dim = model.dimension();
    ModelSummary s;
    s.model_index = model.index();
    s.dim = dim;
    s.contrast = -sum_of_squares(stats.mean, dim);
    double ss = 0.0;
    for (std::size_t k = 0; k < dim; ++k) ss += stats.centered_ss[k];
    s.p_w = ss / (p * (p - 1.0));
    if (truth) {
      ProjectionFit fit{model, std::vector<double>(stats.mean.begin(), stats.mean.begin() + static_cast<std::ptrdiff_t>(dim)), s.contrast};
      const auto risk = risk_from_coefficients(fit, *truth, oracle->squared_norm);
      s.risk = risk.total;
      s.bias = risk.bias;
      s.variance = risk.variance;
      s.ideal_pen = ideal_penalty_from_coefficients(fit.coefficients, *truth, dim);
    }
    return s;
  };

  if (collection.spans_nested() && !collection.models.empty()) {
    const auto stats = block_statistics(sample, collection.largest());
    for (std::size_t i = 0; i < collection.models.size(); ++i)
      out.push_back(summarize(collection.models[i], stats, oracle ? &oracle->for_model(i) : nullptr));
  } else {
    for (std::size_t i = 0; i < collection.models.size(); ++i) {
      const auto stats = block_statistics(sample, collection.models[i]);
      out.push_back(summarize(collection.models[i], stats, oracle ? &oracle->for_model(i) : nullptr));
    }
  }
  return out;
}

/// Criterion rows with pen = pen_W(m, C) from precomputed summaries (closed form).
inline std::vector<CriterionRow> criterion_rows(const std::vector<ModelSummary>& summaries, double C,
                                                double c_tilde) {
  std::vector<CriterionRow> rows;
  rows.reserve(summaries.size());
  for (const auto& s : summaries) {
    CriterionRow r;
    r.model_index = s.model_index;
    r.dim = s.dim;
    r.contrast = s.contrast;
    r.p_w = s.p_w;
    r.pen = 2.0 * C * s.p_w / c_tilde;
    r.risk = s.risk;
    r.ideal_pen = s.ideal_pen;
    rows.push_back(r);
  }
  return rows;
}

inline SelectionReport run_ppe(const BlockedSample& sample, const ModelCollection& collection,
                               const PenaltyConfig& config, const OracleTable* oracle = nullptr) {
  const auto law = config.law(sample.scheme().p);
  const double ctw = c_tilde_w(law);
  const double C = config.constant_for(law);
  const auto summaries = summarize_collection(sample, collection, oracle);
  auto rows = criterion_rows(summaries, C, ctw);
  if (config.method == PenaltyMethod::monte_carlo) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto rec = penalty_monte_carlo(sample, collection.models[i], law, C, config.replicates,
                                           derive_seed(config.seed, {collection.models[i].index()}));
      rows[i].pen = rec.pen;
      rows[i].p_w = rec.p_w;
      rows[i].standard_error = rec.standard_error;
    }
  }
  return select_model(std::move(rows));
}

inline SelectionReport run_ppe(const BlockedSample& sample, const ModelCollection& collection,
                               const PenaltyConfig& config, const TrueDensity& truth) {
  const auto table = make_oracle_table(truth, collection);
  return run_ppe(sample, collection, config, &table);
}

}  // namespace mixsel
