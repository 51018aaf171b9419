/**
 * @file slope.hpp
 * @brief Slope algorithm: sweep pen = K * Delta_m, locate the complexity jump
 *        at K~, select with 2 K~.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsel/selection.hpp"

namespace mixsel {

enum class DeltaMeasure { pen_w_unit, dimension_over_n };

inline std::string_view to_string(DeltaMeasure m) {
  return m == DeltaMeasure::pen_w_unit ? "pen_w_unit" : "dimension/n";
}

inline DeltaMeasure parse_delta_measure(std::string_view name) {
  if (name == "pen_w_unit" || name == "pen-w") return DeltaMeasure::pen_w_unit;
  if (name == "dimension/n" || name == "dimension") return DeltaMeasure::dimension_over_n;
  throw std::invalid_argument("unknown slope measure '" + std::string(name) + "'");
}

struct SlopeRow {
  std::size_t model_index = 0;
  std::size_t dim = 0;
  double contrast = 0.0;
  double delta = 0.0;
};

struct SlopePoint {
  double K = 0.0;
  std::size_t model_index = 0;
  std::size_t dim = 0;
  double delta = 0.0;
};

struct SlopePath {
  DeltaMeasure measure = DeltaMeasure::pen_w_unit;
  std::vector<SlopePoint> points;
};

/// Ascending grid start, start+step, ..., stop given as "start:stop:step".
inline std::vector<double> parse_grid(std::string_view text) {
  std::vector<double> parts;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed grid '" + std::string(text) + "'");
    }
  }
  if (parts.size() != 3) throw std::invalid_argument("grid must be start:stop:step");
  const double start = parts[0], stop = parts[1], step = parts[2];
  if (!(step > 0.0) || !(stop >= start) || start < 0.0)
    throw std::invalid_argument("grid needs 0 <= start <= stop and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = start + static_cast<double>(i) * step;
  return grid;
}

inline std::vector<double> default_slope_grid() { return parse_grid("0:4:0.05"); }

namespace detail {

inline std::vector<CriterionRow> as_criterion_rows(const std::vector<SlopeRow>& rows, double K) {
  std::vector<CriterionRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    CriterionRow c;
    c.model_index = r.model_index;
    c.dim = r.dim;
    c.contrast = r.contrast;
    c.pen = K * r.delta;
    out.push_back(c);
  }
  return out;
}

inline void validate_rows(const std::vector<SlopeRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("slope needs at least one model");
  for (const auto& r : rows)
    if (!std::isfinite(r.delta) || r.delta < 0.0 || !std::isfinite(r.contrast))
      throw std::invalid_argument("slope rows need finite contrast and delta >= 0");
}

}  // namespace detail

inline SlopePath complexity_path(const std::vector<SlopeRow>& rows, const std::vector<double>& grid,
                                 DeltaMeasure measure = DeltaMeasure::pen_w_unit) {
  if (grid.empty()) throw std::invalid_argument("empty K grid");
  detail::validate_rows(rows);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0)) throw std::invalid_argument("K grid values must be >= 0");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument("K grid must be ascending");
  }
  SlopePath path{measure, {}};
  path.points.reserve(grid.size());
  for (double K : grid) {
    const auto crit = detail::as_criterion_rows(rows, K);
    const std::size_t best = argmin_rows(crit, [](const CriterionRow& r) { return r.crit(); });
    path.points.push_back({K, rows[best].model_index, rows[best].dim, rows[best].delta});
  }
  return path;
}

/// Right endpoint of the grid step with the largest drop of Delta_{m_hat(K)};
/// the first such step wins ties. nullopt when the path never drops.
inline std::optional<double> detect_jump(const SlopePath& path) {
  if (path.points.empty()) throw std::invalid_argument("empty slope path");
  double best_drop = 0.0;
  std::optional<double> k_tilde;
  for (std::size_t i = 1; i < path.points.size(); ++i) {
    const double drop = path.points[i - 1].delta - path.points[i].delta;
    if (drop > best_drop) {
      best_drop = drop;
      k_tilde = path.points[i].K;
    }
  }
  return k_tilde;
}

struct SlopeResult {
  SlopePath path;
  double k_tilde = 0.0;
  bool jump_detected = false;
  SelectionReport selection;

  nlohmann::json summary_json() const {
    nlohmann::json j = selection.summary_json();
    j["k_tilde"] = k_tilde;
    j["final_K"] = 2.0 * k_tilde;
    j["jump_detected"] = jump_detected;
    j["measure"] = std::string(to_string(path.measure));
    return j;
  }
};

/// Full slope algorithm. Without a jump K~ falls back to the grid midpoint.
/// @p risks, if given, are attached to the final selection for oracle ratios.
inline SlopeResult slope_select(const std::vector<SlopeRow>& rows, const std::vector<double>& grid,
                                DeltaMeasure measure = DeltaMeasure::pen_w_unit,
                                const std::vector<double>* risks = nullptr) {
  SlopeResult out;
  out.path = complexity_path(rows, grid, measure);
  const auto jump = detect_jump(out.path);
  out.jump_detected = jump.has_value();
  out.k_tilde = jump.value_or(0.5 * (grid.front() + grid.back()));
  auto crit = detail::as_criterion_rows(rows, 2.0 * out.k_tilde);
  if (risks) {
    if (risks->size() != crit.size()) throw std::invalid_argument("risk count does not match rows");
    for (std::size_t i = 0; i < crit.size(); ++i) crit[i].risk = (*risks)[i];
  }
  out.selection = select_model(std::move(crit));
  return out;
}

/// Slope rows from collection summaries. pen_w_unit uses pen_W(m, 1) = 2 p_W / C_W.
inline std::vector<SlopeRow> slope_rows(const std::vector<ModelSummary>& summaries, DeltaMeasure measure,
                                        double c_tilde, std::size_t n) {
  std::vector<SlopeRow> rows;
  rows.reserve(summaries.size());
  for (const auto& s : summaries) {
    const double delta = measure == DeltaMeasure::pen_w_unit
                             ? 2.0 * s.p_w / c_tilde
                             : static_cast<double>(s.dim) / static_cast<double>(n);
    rows.push_back({s.model_index, s.dim, s.contrast, delta});
  }
  return rows;
}

}  // namespace mixsel
