/**
 * @file experiment.hpp
 * @brief Replicated simulate -> fit -> penalize -> select/slope studies.
 *
 * Every replication draws its own seed from (master seed, n, q, replication),
 * so results do not depend on the number of workers or their scheduling.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsel/basis.hpp"
#include "mixsel/blocks.hpp"
#include "mixsel/io.hpp"
#include "mixsel/parallel.hpp"
#include "mixsel/processes.hpp"
#include "mixsel/random.hpp"
#include "mixsel/selection.hpp"
#include "mixsel/slope.hpp"

namespace mixsel {

/// Validation failure tied to a configuration key, e.g. "penalty.method".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key_path, const std::string& message)
      : std::invalid_argument(key_path + ": " + message), key_path_(std::move(key_path)) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

struct SlopeConfig {
  std::string grid = "0:4:0.05";
  DeltaMeasure measure = DeltaMeasure::pen_w_unit;
};

struct ExperimentConfig {
  ProcessSpec process;
  CollectionKind collection = CollectionKind::haar;
  std::size_t max_models = kDefaultModelCap;
  std::vector<std::size_t> n_list{8192};
  std::vector<std::size_t> q_list{4};
  PenaltyConfig penalty;
  SlopeConfig slope;
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  std::string output_dir;

  void validate() const {
    try {
      process.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("process", e.what());
    }
    if (max_models < 1) throw ConfigError("max_models", "must be >= 1");
    if (n_list.empty()) throw ConfigError("n", "at least one sample size is required");
    if (q_list.empty()) throw ConfigError("q", "at least one block length is required");
    for (std::size_t i = 0; i < n_list.size(); ++i)
      if (n_list[i] < 8) throw ConfigError("n[" + std::to_string(i) + "]", "must be >= 8");
    for (std::size_t i = 0; i < q_list.size(); ++i) {
      if (q_list[i] < 1) throw ConfigError("q[" + std::to_string(i) + "]", "must be >= 1");
      for (std::size_t n : n_list)
        if (4 * q_list[i] > n)
          throw ConfigError("q[" + std::to_string(i) + "]", "leaves fewer than 2 blocks for n = " + std::to_string(n));
    }
    if (replications < 1) throw ConfigError("replications", "must be >= 1");
    if (penalty.multiplier <= 0.0) throw ConfigError("penalty.multiplier", "must be > 0");
    if (penalty.constant && *penalty.constant < 0.0) throw ConfigError("penalty.constant", "must be >= 0");
    if (penalty.method == PenaltyMethod::monte_carlo && penalty.replicates < 1)
      throw ConfigError("penalty.replicates", "must be >= 1");
    try {
      (void)WeightLaw::make(penalty.weight, 2, penalty.weight_parameter);
      if (penalty.weight == WeightKind::point_mass) throw std::invalid_argument("degenerate weight law");
    } catch (const std::invalid_argument& e) {
      throw ConfigError("penalty.weight", e.what());
    }
    try {
      (void)parse_grid(slope.grid);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("slope.grid", e.what());
    }
  }

  nlohmann::json to_json() const {
    return {{"process", process.to_json()},
            {"collection", std::string(to_string(collection))},
            {"max_models", max_models},
            {"n", n_list},
            {"q", q_list},
            {"penalty", penalty.to_json()},
            {"slope", {{"grid", slope.grid}, {"measure", std::string(to_string(slope.measure))}}},
            {"replications", replications},
            {"seed", seed},
            {"output_dir", output_dir}};
  }

  /// Keys absent from @p j keep their defaults. Errors carry the key path.
  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    auto field = [&](const nlohmann::json& obj, const std::string& key, const std::string& path, auto& dest) {
      if (!obj.contains(key)) return;
      try {
        dest = obj.at(key).get<std::decay_t<decltype(dest)>>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path, e.what());
      }
    };
    auto enum_field = [&](const nlohmann::json& obj, const std::string& key, const std::string& path, auto parse,
                          auto& dest) {
      if (!obj.contains(key)) return;
      try {
        dest = parse(obj.at(key).get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path, e.what());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
      }
    };
    auto size_list = [&](const std::string& key, std::vector<std::size_t>& dest) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      if (v.is_number_unsigned()) {
        dest = {v.get<std::size_t>()};
        return;
      }
      field(j, key, key, dest);
    };

    if (j.contains("process")) {
      const auto& p = j.at("process");
      if (!p.is_object()) throw ConfigError("process", "must be an object");
      enum_field(p, "kind", "process.kind", parse_process_kind, c.process.kind);
      if (p.contains("target")) {
        try {
          c.process.target = TrueDensity::from_json(p.at("target"));
        } catch (const std::exception& e) {
          throw ConfigError("process.target", e.what());
        }
      }
      field(p, "ar_coefficient", "process.ar_coefficient", c.process.ar_coefficient);
      field(p, "burn_in", "process.burn_in", c.process.burn_in);
    }
    enum_field(j, "collection", "collection", parse_collection_kind, c.collection);
    field(j, "max_models", "max_models", c.max_models);
    size_list("n", c.n_list);
    size_list("q", c.q_list);
    if (j.contains("penalty")) {
      const auto& p = j.at("penalty");
      if (!p.is_object()) throw ConfigError("penalty", "must be an object");
      enum_field(p, "weight", "penalty.weight", parse_weight_kind, c.penalty.weight);
      field(p, "weight_parameter", "penalty.weight_parameter", c.penalty.weight_parameter);
      field(p, "multiplier", "penalty.multiplier", c.penalty.multiplier);
      if (p.contains("constant") && !p.at("constant").is_null()) {
        double v = 0.0;
        field(p, "constant", "penalty.constant", v);
        c.penalty.constant = v;
      }
      enum_field(p, "method", "penalty.method", parse_penalty_method, c.penalty.method);
      field(p, "replicates", "penalty.replicates", c.penalty.replicates);
    }
    if (j.contains("slope")) {
      const auto& s = j.at("slope");
      if (!s.is_object()) throw ConfigError("slope", "must be an object");
      field(s, "grid", "slope.grid", c.slope.grid);
      enum_field(s, "measure", "slope.measure", parse_delta_measure, c.slope.measure);
    }
    field(j, "replications", "replications", c.replications);
    field(j, "seed", "seed", c.seed);
    field(j, "output_dir", "output_dir", c.output_dir);
    c.validate();
    return c;
  }
};

struct ReplicationResult {
  std::size_t n = 0;
  std::size_t q = 0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::size_t selected = 0;
  std::size_t selected_dim = 0;
  std::size_t oracle = 0;
  std::size_t oracle_dim = 0;
  double ratio = 0.0;
  double k_tilde = 0.0;
  bool jump_detected = false;
  std::size_t slope_selected = 0;
  std::size_t slope_dim = 0;
  double slope_ratio = 0.0;
  /// Selected dimension at each K of the slope grid.
  std::vector<std::size_t> path_dims;
};

struct Quantiles {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;

  nlohmann::json to_json() const {
    return {{"min", min}, {"q1", q1}, {"median", median}, {"q3", q3}, {"max", max}, {"mean", mean}};
  }
};

/// Linear-interpolation quantile (type 7) of unsorted values.
inline double quantile(std::vector<double> values, double level) {
  if (values.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double h = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline Quantiles summarize(const std::vector<double>& values) {
  Quantiles q;
  q.min = quantile(values, 0.0);
  q.q1 = quantile(values, 0.25);
  q.median = quantile(values, 0.5);
  q.q3 = quantile(values, 0.75);
  q.max = quantile(values, 1.0);
  double acc = 0.0;
  for (double v : values) acc += v;
  q.mean = acc / static_cast<double>(values.size());
  return q;
}

struct CellSummary {
  std::size_t n = 0;
  std::size_t q = 0;
  std::size_t replications = 0;
  Quantiles ratio;
  Quantiles slope_ratio;
  Quantiles selected_dim;
  double jump_rate = 0.0;
  /// dimension_histograms[k][dim] = count of replications selecting dim at grid[k].
  std::vector<std::map<std::size_t, std::size_t>> dimension_histograms;
};

struct AggregateReport {
  ExperimentConfig config;
  std::vector<double> grid;
  std::vector<ReplicationResult> replications;
  std::vector<CellSummary> cells;
};

/// One replication: simulate, fit the collection, PPE at the configured C and
/// the slope algorithm, both scored against exact risks.
inline ReplicationResult run_replication(const ExperimentConfig& config, const ModelCollection& collection,
                                         const OracleTable& oracle, const std::vector<double>& grid,
                                         std::size_t n, std::size_t q, std::size_t rep) {
  ReplicationResult out;
  out.n = n;
  out.q = q;
  out.replication = rep;
  out.seed = derive_seed(config.seed, {n, q, rep});

  ProcessSpec spec = config.process;
  spec.seed = out.seed;
  BlockedSample sample(simulate(spec, n), make_blocks(n, q));

  PenaltyConfig penalty = config.penalty;
  penalty.seed = derive_seed(out.seed, {1});
  const auto law = penalty.law(sample.scheme().p);
  const double ctw = c_tilde_w(law);
  const auto summaries = summarize_collection(sample, collection, &oracle);
  const auto ppe = penalty.method == PenaltyMethod::closed_form
                       ? select_model(criterion_rows(summaries, penalty.constant_for(law), ctw))
                       : run_ppe(sample, collection, penalty, &oracle);
  out.selected = ppe.selected_row().model_index;
  out.selected_dim = ppe.selected_row().dim;
  out.oracle = ppe.rows.at(*ppe.oracle).model_index;
  out.oracle_dim = ppe.rows.at(*ppe.oracle).dim;
  out.ratio = *ppe.oracle_ratio;

  const auto rows = slope_rows(summaries, config.slope.measure, ctw, n);
  std::vector<double> risks;
  risks.reserve(summaries.size());
  for (const auto& s : summaries) risks.push_back(*s.risk);
  const auto slope = slope_select(rows, grid, config.slope.measure, &risks);
  out.k_tilde = slope.k_tilde;
  out.jump_detected = slope.jump_detected;
  out.slope_selected = slope.selection.selected_row().model_index;
  out.slope_dim = slope.selection.selected_row().dim;
  out.slope_ratio = *slope.selection.oracle_ratio;
  out.path_dims.reserve(slope.path.points.size());
  for (const auto& pt : slope.path.points) out.path_dims.push_back(pt.dim);
  return out;
}

inline CellSummary summarize_cell(const std::vector<ReplicationResult>& reps, std::size_t n, std::size_t q,
                                  std::size_t grid_size) {
  CellSummary cell;
  cell.n = n;
  cell.q = q;
  std::vector<double> ratios, slope_ratios, dims;
  std::size_t jumps = 0;
  cell.dimension_histograms.resize(grid_size);
  for (const auto& r : reps) {
    if (r.n != n || r.q != q) continue;
    ratios.push_back(r.ratio);
    slope_ratios.push_back(r.slope_ratio);
    dims.push_back(static_cast<double>(r.selected_dim));
    jumps += r.jump_detected ? 1 : 0;
    for (std::size_t k = 0; k < r.path_dims.size() && k < grid_size; ++k) ++cell.dimension_histograms[k][r.path_dims[k]];
  }
  cell.replications = ratios.size();
  if (!ratios.empty()) {
    cell.ratio = summarize(ratios);
    cell.slope_ratio = summarize(slope_ratios);
    cell.selected_dim = summarize(dims);
    cell.jump_rate = static_cast<double>(jumps) / static_cast<double>(ratios.size());
  }
  return cell;
}

inline std::string replications_csv(const AggregateReport& report) {
  std::ostringstream out;
  out << "n,q,rep,seed,selected,selected_dim,oracle,oracle_dim,ratio,k_tilde,jump_detected,slope_selected,slope_dim,"
         "slope_ratio\n";
  for (const auto& r : report.replications) {
    out << r.n << ',' << r.q << ',' << r.replication << ',' << r.seed << ',' << r.selected << ',' << r.selected_dim
        << ',' << r.oracle << ',' << r.oracle_dim << ',' << format_double(r.ratio) << ','
        << format_double(r.k_tilde) << ',' << (r.jump_detected ? 1 : 0) << ',' << r.slope_selected << ','
        << r.slope_dim << ',' << format_double(r.slope_ratio) << '\n';
  }
  return out.str();
}

inline std::string dimension_histogram_csv(const AggregateReport& report) {
  std::ostringstream out;
  out << "n,q,K,dim,count\n";
  for (const auto& cell : report.cells)
    for (std::size_t k = 0; k < cell.dimension_histograms.size(); ++k)
      for (const auto& [dim, count] : cell.dimension_histograms[k])
        out << cell.n << ',' << cell.q << ',' << format_double(report.grid[k]) << ',' << dim << ',' << count << '\n';
  return out.str();
}

inline nlohmann::json summary_json(const AggregateReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"n", c.n},
                     {"q", c.q},
                     {"replications", c.replications},
                     {"ratio", c.ratio.to_json()},
                     {"slope_ratio", c.slope_ratio.to_json()},
                     {"selected_dim", c.selected_dim.to_json()},
                     {"jump_rate", c.jump_rate}});
  }
  return {{"schema_version", kSchemaVersion}, {"config", report.config.to_json()}, {"cells", std::move(cells)}};
}

inline void write_experiment_outputs(const AggregateReport& report, const std::filesystem::path& dir) {
  write_text(dir / "replications.csv", replications_csv(report));
  write_text(dir / "dimension_by_K.csv", dimension_histogram_csv(report));
  write_json(dir / "summary.json", summary_json(report));
}

inline AggregateReport run_experiment(const ExperimentConfig& config, std::size_t workers = default_workers()) {
  config.validate();
  AggregateReport report;
  report.config = config;
  report.grid = parse_grid(config.slope.grid);

  struct Task {
    std::size_t cell, n, q, rep;
  };
  std::vector<Task> tasks;
  std::vector<ModelCollection> collections;
  std::vector<OracleTable> oracles;
  for (std::size_t n : config.n_list) {
    for (std::size_t q : config.q_list) {
      collections.push_back(enumerate_models(config.collection, n, config.max_models));
      oracles.push_back(make_oracle_table(config.process.target, collections.back()));
      for (std::size_t rep = 0; rep < config.replications; ++rep) tasks.push_back({collections.size() - 1, n, q, rep});
    }
  }

  std::vector<ReplicationResult> results(tasks.size());
  std::vector<std::exception_ptr> errors;
  parallel_for(
      tasks.size(), workers,
      [&](std::size_t i) {
        const auto& t = tasks[i];
        results[i] = run_replication(config, collections[t.cell], oracles[t.cell], report.grid, t.n, t.q, t.rep);
      },
      errors);

  std::exception_ptr first_error;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (errors[i]) {
      if (!first_error) first_error = errors[i];
    } else {
      report.replications.push_back(std::move(results[i]));
    }
  }
  for (std::size_t n : config.n_list)
    for (std::size_t q : config.q_list) report.cells.push_back(summarize_cell(report.replications, n, q, report.grid.size()));

  if (first_error) {
    if (!config.output_dir.empty()) write_experiment_outputs(report, config.output_dir);
    std::rethrow_exception(first_error);
  }
  if (!config.output_dir.empty()) write_experiment_outputs(report, config.output_dir);
  return report;
}

}  // namespace mixsel
