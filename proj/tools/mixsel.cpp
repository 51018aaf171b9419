// mixsel: simulate, select, slope, experiment and check from the command line.
//
// Exit status: 0 success, 1 validation error, 2 runtime failure.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixsel/acceptance.hpp"
#include "mixsel/experiment.hpp"
#include "mixsel/io.hpp"

namespace {

using namespace mixsel;
using nlohmann::json;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// Flags shared by simulate / select / slope / experiment. Anything set here
/// overrides the JSON config.
struct CommonFlags {
  std::string config_path;
  std::optional<std::size_t> n;
  std::optional<std::size_t> q;
  std::optional<std::string> collection;
  std::optional<std::size_t> max_models;
  std::optional<std::string> process;
  std::optional<std::string> target;
  std::optional<double> ar_coefficient;
  std::optional<std::size_t> burn_in;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> weight;
  std::optional<double> weight_parameter;
  std::optional<double> multiplier;
  std::optional<double> constant;
  std::optional<std::string> method;
  std::optional<std::size_t> replicates;
  std::optional<std::string> grid;
  std::optional<std::string> measure;
};

void add_process_flags(CLI::App& app, CommonFlags& f) {
  app.add_option("--config", f.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--n", f.n, "sample size");
  app.add_option("--process", f.process, "iid | ar-bernoulli | gaussian-ar1");
  app.add_option("--target", f.target, "uniform | linear | path to a density JSON file");
  app.add_option("--ar", f.ar_coefficient, "gaussian-ar1 coefficient");
  app.add_option("--burn-in", f.burn_in, "burn-in length");
  app.add_option("--seed", f.seed, "master seed");
}

void add_selection_flags(CLI::App& app, CommonFlags& f) {
  app.add_option("--q", f.q, "block length");
  app.add_option("--collection", f.collection, "haar | fourier | histogram");
  app.add_option("--max-models", f.max_models, "cap on the number of models");
  app.add_option("--weight", f.weight, "multinomial | poisson | exponential");
  app.add_option("--weight-param", f.weight_parameter, "Poisson mean or exponential rate");
  app.add_option("--multiplier", f.multiplier, "C as a multiple of C_W");
  app.add_option("--constant", f.constant, "explicit penalty constant C");
  app.add_option("--method", f.method, "closed | monte-carlo");
  app.add_option("--replicates", f.replicates, "Monte-Carlo weight draws");
  app.add_option("--grid", f.grid, "slope grid start:stop:step");
  app.add_option("--measure", f.measure, "pen_w_unit | dimension/n");
}

json load_json_file(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw ConfigError(key, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(key, e.what());
  }
}

json target_json(const std::string& value) {
  if (value == "uniform" || value == "linear") return json{{"kind", value}};
  return load_json_file(value, "process.target");
}

/// Config file (if any) with the flags layered on top, then validated.
ExperimentConfig build_config(const CommonFlags& f, json extra = json::object()) {
  json j = f.config_path.empty() ? json::object() : load_json_file(f.config_path, "<config>");
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  auto& process = j["process"];
  if (process.is_null()) process = json::object();
  if (f.process) process["kind"] = *f.process;
  if (f.target) process["target"] = target_json(*f.target);
  if (f.ar_coefficient) process["ar_coefficient"] = *f.ar_coefficient;
  if (f.burn_in) process["burn_in"] = *f.burn_in;
  if (f.n) j["n"] = std::vector<std::size_t>{*f.n};
  if (f.q) j["q"] = std::vector<std::size_t>{*f.q};
  if (f.collection) j["collection"] = *f.collection;
  if (f.max_models) j["max_models"] = *f.max_models;
  if (f.seed) j["seed"] = *f.seed;
  auto& penalty = j["penalty"];
  if (penalty.is_null()) penalty = json::object();
  if (f.weight) penalty["weight"] = *f.weight;
  if (f.weight_parameter) penalty["weight_parameter"] = *f.weight_parameter;
  if (f.multiplier) penalty["multiplier"] = *f.multiplier;
  if (f.constant) penalty["constant"] = *f.constant;
  if (f.method) penalty["method"] = *f.method;
  if (f.replicates) penalty["replicates"] = *f.replicates;
  auto& slope = j["slope"];
  if (slope.is_null()) slope = json::object();
  if (f.grid) slope["grid"] = *f.grid;
  if (f.measure) slope["measure"] = *f.measure;
  j.merge_patch(extra);
  return ExperimentConfig::from_json(j);
}

bool config_sets(const CommonFlags& f, const std::string& key) {
  if (f.config_path.empty()) return false;
  return load_json_file(f.config_path, "<config>").contains(key);
}

/// The sample and block scheme for select / slope: read from --input or simulated.
struct PreparedRun {
  ExperimentConfig config;
  BlockedSample sample;
  bool simulated = true;
};

PreparedRun prepare(const CommonFlags& f, const std::string& input) {
  ExperimentConfig config = build_config(f);
  std::vector<double> values;
  bool simulated = input.empty();
  if (simulated) {
    ProcessSpec spec = config.process;
    spec.seed = config.seed;
    values = simulate(spec, config.n_list.front());
  } else {
    values = read_sample_csv(std::filesystem::path(input));
    config.n_list = {values.size()};
  }
  const std::size_t n = values.size();
  const bool explicit_q = f.q || config_sets(f, "q");
  const auto scheme = explicit_q ? make_blocks(n, config.q_list.front()) : make_blocks(n);
  config.q_list = {scheme.q};
  return {config, BlockedSample(std::move(values), scheme), simulated};
}

json run_header(const PreparedRun& run) {
  return {{"schema_version", kSchemaVersion},
          {"config", run.config.to_json()},
          {"scheme", run.sample.scheme().to_json()},
          {"simulated", run.simulated}};
}

int cmd_simulate(const CommonFlags& f, const std::string& out) {
  const auto config = build_config(f);
  ProcessSpec spec = config.process;
  spec.seed = config.seed;
  const auto sample = simulate(spec, config.n_list.front());
  if (out.empty()) {
    write_sample_csv(std::cout, sample);
  } else {
    std::ostringstream text;
    write_sample_csv(text, sample);
    write_text(out, text.str());
  }
  return EXIT_SUCCESS;
}

int cmd_select(const CommonFlags& f, const std::string& input, const std::string& out, bool with_oracle) {
  auto run = prepare(f, input);
  const auto collection = enumerate_models(run.config.collection, run.sample.scheme().n, run.config.max_models);
  PenaltyConfig penalty = run.config.penalty;
  penalty.seed = derive_seed(run.config.seed, {1});
  std::optional<OracleTable> oracle;
  if (run.simulated || with_oracle) oracle = make_oracle_table(run.config.process.target, collection);
  const auto report = run_ppe(run.sample, collection, penalty, oracle ? &*oracle : nullptr);
  const auto law = penalty.law(run.sample.scheme().p);

  json summary = run_header(run);
  summary["selection"] = report.summary_json();
  summary["C"] = penalty.constant_for(law);
  summary["C_W"] = c_tilde_w(law);
  summary["models"] = collection.models.size();

  std::ostringstream csv;
  write_criterion_csv(csv, report, penalty.method);
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(std::filesystem::path(out) / "criterion.csv", csv.str());
    write_json(std::filesystem::path(out) / "summary.json", summary);
    std::cout << summary["selection"].dump() << '\n';
  }
  return EXIT_SUCCESS;
}

int cmd_slope(const CommonFlags& f, const std::string& input, const std::string& out, bool with_oracle) {
  auto run = prepare(f, input);
  const auto collection = enumerate_models(run.config.collection, run.sample.scheme().n, run.config.max_models);
  std::optional<OracleTable> oracle;
  if (run.simulated || with_oracle) oracle = make_oracle_table(run.config.process.target, collection);
  const auto summaries = summarize_collection(run.sample, collection, oracle ? &*oracle : nullptr);
  const double ctw = c_tilde_w(run.config.penalty.law(run.sample.scheme().p));
  const auto rows = slope_rows(summaries, run.config.slope.measure, ctw, run.sample.scheme().n);
  std::vector<double> risks;
  if (oracle)
    for (const auto& s : summaries) risks.push_back(*s.risk);
  const auto grid = parse_grid(run.config.slope.grid);
  const auto result = slope_select(rows, grid, run.config.slope.measure, oracle ? &risks : nullptr);

  json summary = run_header(run);
  summary["slope"] = result.summary_json();
  summary["grid_points"] = grid.size();

  std::ostringstream csv;
  write_slope_csv(csv, result.path);
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(std::filesystem::path(out) / "slope_path.csv", csv.str());
    write_json(std::filesystem::path(out) / "summary.json", summary);
    std::cout << summary["slope"].dump() << '\n';
  }
  return EXIT_SUCCESS;
}

int cmd_experiment(const CommonFlags& f, const std::vector<std::size_t>& n_list,
                   const std::vector<std::size_t>& q_list, std::optional<std::size_t> reps, const std::string& out,
                   std::optional<std::size_t> threads) {
  json extra = json::object();
  if (!n_list.empty()) extra["n"] = n_list;
  if (!q_list.empty()) extra["q"] = q_list;
  if (reps) extra["replications"] = *reps;
  if (!out.empty()) extra["output_dir"] = out;
  const auto config = build_config(f, extra);
  const auto report = run_experiment(config, threads.value_or(default_workers()));
  std::cout << summary_json(report).dump(2) << '\n';
  return EXIT_SUCCESS;
}

int cmd_check(const std::vector<int>& ids) {
  for (int id : ids)
    if (id < 1 || id > 9) throw std::invalid_argument("criterion ids are 1..9");
  const auto results = acceptance::run_checks(
      ids, [](const acceptance::CheckOutcome& o) { std::cout << acceptance::format_outcome(o) << std::endl; });
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  return ok ? EXIT_SUCCESS : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-resampling penalties and the slope algorithm for density estimation from mixing data"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string input, out;
  bool with_oracle = false;

  auto* simulate_cmd = app.add_subcommand("simulate", "emit a simulated sample as CSV");
  add_process_flags(*simulate_cmd, flags);
  simulate_cmd->add_option("--out", out, "output file (default stdout)");

  auto* select_cmd = app.add_subcommand("select", "one penalized selection run with the criterion table");
  auto* slope_cmd = app.add_subcommand("slope", "slope algorithm: complexity path and final selection");
  for (auto* cmd : {select_cmd, slope_cmd}) {
    add_process_flags(*cmd, flags);
    add_selection_flags(*cmd, flags);
    cmd->add_option("--input", input, "sample CSV instead of simulating")->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "output directory (default: CSV to stdout)");
    cmd->add_flag("--oracle", with_oracle, "with --input, score against --target");
  }

  std::vector<std::size_t> n_list, q_list;
  std::optional<std::size_t> reps, threads;
  auto* experiment_cmd = app.add_subcommand("experiment", "replicated oracle-ratio study");
  add_process_flags(*experiment_cmd, flags);
  add_selection_flags(*experiment_cmd, flags);
  experiment_cmd->remove_option(experiment_cmd->get_option("--n"));
  experiment_cmd->remove_option(experiment_cmd->get_option("--q"));
  experiment_cmd->add_option("--n", n_list, "sample sizes");
  experiment_cmd->add_option("--q", q_list, "block lengths");
  experiment_cmd->add_option("--reps", reps, "replications per (n, q) cell");
  experiment_cmd->add_option("--out", out, "output directory");
  experiment_cmd->add_option("--threads", threads, "worker threads (default MIXSEL_THREADS or all cores)");

  std::vector<int> criteria;
  auto* check_cmd = app.add_subcommand("check", "run the acceptance criteria");
  check_cmd->add_option("--criteria", criteria, "criterion ids (default all)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? EXIT_SUCCESS : kExitValidation;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(flags, out);
    if (*select_cmd) return cmd_select(flags, input, out, with_oracle);
    if (*slope_cmd) return cmd_slope(flags, input, out, with_oracle);
    if (*experiment_cmd) return cmd_experiment(flags, n_list, q_list, reps, out, threads);
    if (*check_cmd) return cmd_check(criteria);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
