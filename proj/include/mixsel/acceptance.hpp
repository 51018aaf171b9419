/**
 * @file acceptance.hpp
 * @brief End-to-end acceptance checks, shared by the acceptance test binary
 *        and `mixsel check`.
 *
 * Each check returns a CheckOutcome with a one-line detail string. Tolerances
 * and thresholds are fixed here; runtime budgets are part of the pass
 * condition.
 */
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mixsel/basis.hpp"
#include "mixsel/blocks.hpp"
#include "mixsel/estimator.hpp"
#include "mixsel/experiment.hpp"
#include "mixsel/penalty.hpp"
#include "mixsel/processes.hpp"
#include "mixsel/random.hpp"
#include "mixsel/selection.hpp"
#include "mixsel/slope.hpp"
#include "mixsel/true_density.hpp"

namespace mixsel::acceptance {

struct CheckOutcome {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::size_t uniform_index(Engine& engine, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(engine() % (hi - lo + 1));
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

}  // namespace detail

/// Monte-Carlo penalty (B = 20000) within 4 se of the closed form on 50 random
/// fixtures; hand instance p = 2 gives pen = C at C = C_W = 2.
inline CheckOutcome penalty_exactness(std::uint64_t seed = 1) {
  detail::Stopwatch clock;
  CheckOutcome out{1, "penalty exactness (Monte-Carlo vs closed form)", true, "", 0.0};
  Engine engine(seed);
  const CollectionKind kinds[] = {CollectionKind::histogram, CollectionKind::fourier, CollectionKind::haar};
  const WeightKind laws[] = {WeightKind::multinomial, WeightKind::poisson, WeightKind::exponential};
  double worst_z = 0.0;
  std::size_t failures = 0;
  for (std::size_t f = 0; f < 50; ++f) {
    const std::size_t p = detail::uniform_index(engine, 2, 64);
    const std::size_t q = detail::uniform_index(engine, 1, 3);
    const CollectionKind kind = kinds[f % 3];
    int size = 1;
    switch (kind) {
      case CollectionKind::histogram: size = static_cast<int>(detail::uniform_index(engine, 1, 32)); break;
      case CollectionKind::fourier: size = static_cast<int>(detail::uniform_index(engine, 1, 16)); break;
      case CollectionKind::haar: size = static_cast<int>(detail::uniform_index(engine, 1, 4)); break;
    }
    const Model model(kind, 1, size);
    ProcessSpec spec;
    spec.kind = f % 2 == 0 ? ProcessKind::ar_bernoulli : ProcessKind::iid;
    spec.target = TrueDensity::linear();
    spec.seed = derive_seed(seed, {f, 0});
    const std::size_t n = 2 * p * q;
    BlockedSample sample(simulate(spec, n), make_scheme(n, p, q));
    const auto law = WeightLaw::make(laws[(f / 3) % 3], p, 1.0);
    const double C = c_tilde_w(law) * (0.5 + 1.5 * uniform01(engine));
    const auto closed = penalty_closed_form(sample, model, law, C);
    const auto mc = penalty_monte_carlo(sample, model, law, C, 20000, derive_seed(seed, {f, 1}));
    const double diff = std::abs(mc.pen - closed.pen);
    const bool ok = mc.standard_error > 0.0 ? diff <= 4.0 * mc.standard_error : diff == 0.0;
    if (mc.standard_error > 0.0) worst_z = std::max(worst_z, diff / mc.standard_error);
    if (!ok) ++failures;
  }
  const auto hand = BlockedSample::from_blocks({{0.2}, {0.8}});
  const Model d2(CollectionKind::histogram, 2, 2);
  const auto law2 = WeightLaw::multinomial(2);
  const double ctw = c_tilde_w(law2);
  const auto rec = penalty_closed_form(hand, d2, law2, ctw);
  const bool hand_ok = ctw == 2.0 && std::abs(rec.pen - ctw) <= 1e-15 && std::abs(rec.p_w - 1.0) <= 1e-15;
  out.seconds = clock.seconds();
  out.passed = failures == 0 && hand_ok && out.seconds < 60.0;
  out.detail = "fixtures failing 4se: " + std::to_string(failures) + "/50, max |z| = " + detail::fmt(worst_z) +
               ", hand instance pen(C_W=2) = " + detail::fmt(rec.pen, 17) + (hand_ok ? " (within 1e-15)" : " (WRONG)");
  return out;
}

/// sup-norm constants against grid maxima and the uniform-P integral.
inline CheckOutcome appendix_constants() {
  detail::Stopwatch clock;
  CheckOutcome out{2, "sup-norm constants with c_D = 1", true, "", 0.0};
  constexpr std::size_t kGrid = 10000;
  double worst = 0.0;
  auto check_model = [&](const Model& model) {
    const double b2 = sup_norm_bound(model);
    double grid_max = 0.0;
    double integral = 0.0;
    for (std::size_t g = 0; g < kGrid; ++g) {
      const double x = (static_cast<double>(g) + 0.5) / kGrid;
      double s = 0.0;
      for_each_nonzero(model, x, [&](std::size_t, double v) { s += v * v; });
      grid_max = std::max(grid_max, s);
      integral += s / kGrid;
    }
    worst = std::max({worst, std::abs(grid_max - b2), std::abs(integral - b2)});
  };
  for (int d = 1; d <= 64; ++d) check_model(Model(CollectionKind::histogram, static_cast<std::size_t>(d), d));
  for (int m = 1; m <= 64; ++m) check_model(Model(CollectionKind::fourier, static_cast<std::size_t>(m), m));
  // Haar: the sum is constant, checked at every dyadic cell boundary.
  bool haar_exact = true;
  for (int J = 1; J <= 10; ++J) {
    const Model model(CollectionKind::haar, static_cast<std::size_t>(J), J);
    const std::size_t cells = std::size_t{1} << (J + 2);
    for (std::size_t g = 0; g < cells; ++g) {
      const double x = static_cast<double>(g) / static_cast<double>(cells);
      double s = 0.0;
      for_each_nonzero(model, x, [&](std::size_t, double v) { s += v * v; });
      haar_exact = haar_exact && std::abs(s - sup_norm_bound(model)) <= 1e-9 * sup_norm_bound(model);
    }
  }
  out.seconds = clock.seconds();
  out.passed = worst <= 1e-9 && haar_exact;
  out.detail = "max deviation (histogram d<=64, Fourier m<=64) = " + detail::fmt(worst) +
               ", Haar J<=10 at dyadic points: " + (haar_exact ? "yes" : "no");
  return out;
}

/// total - bias - p(m) on 100 random fixtures.
inline CheckOutcome pythagoras(std::uint64_t seed = 3) {
  detail::Stopwatch clock;
  CheckOutcome out{3, "Pythagoras risk identity", true, "", 0.0};
  Engine engine(seed);
  const TrueDensity densities[] = {
      TrueDensity::uniform(), TrueDensity::linear(),
      TrueDensity("piecewise-polynomial", {0.0, 0.5, 1.0}, {{0.5}, {0.0, 2.0}})};
  const CollectionKind kinds[] = {CollectionKind::histogram, CollectionKind::fourier, CollectionKind::haar};
  double worst = 0.0;
  for (std::size_t f = 0; f < 100; ++f) {
    const auto& truth = densities[f % 3];
    const CollectionKind kind = kinds[(f / 3) % 3];
    const int size = static_cast<int>(detail::uniform_index(engine, 1, kind == CollectionKind::haar ? 6 : 40));
    const Model model(kind, 1, size);
    const std::size_t p = detail::uniform_index(engine, 2, 200);
    const std::size_t q = detail::uniform_index(engine, 1, 4);
    ProcessSpec spec;
    spec.kind = ProcessKind::ar_bernoulli;
    spec.target = truth;
    spec.seed = derive_seed(seed, {f});
    const std::size_t n = 2 * p * q;
    BlockedSample sample(simulate(spec, n), make_scheme(n, p, q));
    const auto risk = risk_against(project(sample, model), truth);
    worst = std::max(worst, std::abs(risk.total - risk.bias - risk.variance));
  }
  out.seconds = clock.seconds();
  out.passed = worst <= 1e-12;
  out.detail = "max |total - bias - p(m)| = " + detail::fmt(worst);
  return out;
}

/// On i.i.d. data, mean pen_W(m, C_W) matches mean 2 p(m); both estimate
/// 4 D_{A,m} / n, cross-checked with estimate_dam.
inline CheckOutcome expectation_link(std::uint64_t seed = 4) {
  detail::Stopwatch clock;
  CheckOutcome out{4, "expectation link E pen_W(m, C_W) = E 2p(m) = 4D/n", true, "", 0.0};
  constexpr std::size_t n = 4096;
  constexpr std::size_t q = 1;
  constexpr std::size_t reps = 500;
  const int levels[] = {3, 5, 7};
  ModelCollection collection{CollectionKind::haar, {}};
  for (int J : levels) collection.models.emplace_back(CollectionKind::haar, static_cast<std::size_t>(J), J);
  ProcessSpec spec;
  spec.kind = ProcessKind::iid;
  spec.target = TrueDensity::linear();
  const auto oracle = make_oracle_table(spec.target, collection);

  std::vector<std::vector<double>> pen(3), twice_p(3);
  for (std::size_t r = 0; r < reps; ++r) {
    spec.seed = derive_seed(seed, {r});
    BlockedSample sample(simulate(spec, n), make_blocks(n, q));
    const double ctw = c_tilde_w(WeightLaw::multinomial(sample.scheme().p));
    const auto summaries = summarize_collection(sample, collection, &oracle);
    for (std::size_t i = 0; i < 3; ++i) {
      pen[i].push_back(2.0 * ctw * summaries[i].p_w / ctw);
      twice_p[i].push_back(2.0 * summaries[i].variance.value());
    }
  }
  bool ok = true;
  std::ostringstream detail_text;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto rd = static_cast<double>(reps);
    double mp = 0.0, m2p = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      mp += pen[i][r] / rd;
      m2p += twice_p[i][r] / rd;
    }
    double var_diff = 0.0, var_pen = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double d = (pen[i][r] - twice_p[i][r]) - (mp - m2p);
      var_diff += d * d / (rd - 1.0);
      var_pen += (pen[i][r] - mp) * (pen[i][r] - mp) / (rd - 1.0);
    }
    const double se_diff = std::sqrt(var_diff / rd);
    const double se_pen = std::sqrt(var_pen / rd);
    ProcessSpec block_spec = spec;
    const auto dam = estimate_dam(block_spec, collection.models[i], q, 10000, derive_seed(seed, {1000 + i}));
    const double target = 4.0 * dam.value / n;
    const double se_target = 4.0 * dam.standard_error / n;
    const bool link = std::abs(mp - m2p) <= 3.0 * se_diff;
    const bool dam_ok = std::abs(mp - target) <= 3.0 * std::sqrt(se_pen * se_pen + se_target * se_target);
    ok = ok && link && dam_ok;
    detail_text << "J=" << collection.models[i].size() << ": pen " << detail::fmt(mp) << " vs 2p " << detail::fmt(m2p)
                << " (|z|=" << detail::fmt(std::abs(mp - m2p) / se_diff, 3) << "), 4D/n " << detail::fmt(target)
                << (link && dam_ok ? "" : " FAIL") << "; ";
  }
  out.seconds = clock.seconds();
  out.passed = ok && out.seconds < 300.0;
  out.detail = detail_text.str();
  return out;
}

/// Delta_{m_hat(K)} non-increasing in K on 200 random criterion fixtures.
inline CheckOutcome slope_monotonicity(std::uint64_t seed = 5) {
  detail::Stopwatch clock;
  CheckOutcome out{5, "slope path monotonicity", true, "", 0.0};
  Engine engine(seed);
  const auto grid = default_slope_grid();
  std::size_t violations = 0;
  for (std::size_t f = 0; f < 200; ++f) {
    const std::size_t models = detail::uniform_index(engine, 1, 30);
    std::vector<SlopeRow> rows;
    for (std::size_t m = 0; m < models; ++m) {
      const double delta = 0.001 + uniform01(engine);
      rows.push_back({m + 1, detail::uniform_index(engine, 1, 64), -3.0 * uniform01(engine) * delta - uniform01(engine), delta});
    }
    const auto path = complexity_path(rows, grid);
    for (std::size_t i = 1; i < path.points.size(); ++i)
      if (path.points[i].delta > path.points[i - 1].delta) ++violations;
  }
  out.seconds = clock.seconds();
  out.passed = violations == 0;
  out.detail = "increasing steps: " + std::to_string(violations) + " over 200 fixtures x 81 grid points";
  return out;
}

/// Complexity jump: median selected dim at K=0.2 >= 8x median at K=3.0, and a
/// jump detected in >= 90% of 100 seeds.
inline CheckOutcome slope_jump(std::uint64_t seed = 6) {
  detail::Stopwatch clock;
  CheckOutcome out{6, "slope heuristic dimension jump", true, "", 0.0};
  constexpr std::size_t n = 8192;
  constexpr std::size_t q = 4;
  const auto collection = enumerate_models(CollectionKind::haar, n, 10);
  const auto grid = default_slope_grid();
  ProcessSpec spec;
  spec.kind = ProcessKind::ar_bernoulli;
  spec.target = TrueDensity::linear();
  std::vector<double> low_dims, high_dims;
  std::size_t jumps = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    spec.seed = derive_seed(seed, {r});
    BlockedSample sample(simulate(spec, n), make_blocks(n, q));
    const double ctw = c_tilde_w(WeightLaw::multinomial(sample.scheme().p));
    const auto rows = slope_rows(summarize_collection(sample, collection), DeltaMeasure::pen_w_unit, ctw, n);
    const auto low = complexity_path(rows, {0.2});
    const auto high = complexity_path(rows, {3.0});
    low_dims.push_back(static_cast<double>(low.points[0].dim));
    high_dims.push_back(static_cast<double>(high.points[0].dim));
    if (detect_jump(complexity_path(rows, grid))) ++jumps;
  }
  const double low = detail::median(low_dims);
  const double high = detail::median(high_dims);
  out.seconds = clock.seconds();
  out.passed = low >= 8.0 * high && jumps >= 90 && out.seconds < 600.0;
  out.detail = "median dim K=0.2: " + detail::fmt(low) + ", K=3.0: " + detail::fmt(high) +
               ", jump detected in " + std::to_string(jumps) + "/100 seeds";
  return out;
}

/// Shared run for the oracle-ratio checks.
inline AggregateReport oracle_ratio_study(std::uint64_t seed = 7, std::size_t workers = default_workers()) {
  ExperimentConfig config;
  config.process.kind = ProcessKind::ar_bernoulli;
  config.process.target = TrueDensity::linear();
  config.collection = CollectionKind::haar;
  config.max_models = 10;
  config.n_list = {2048, 8192, 32768};
  config.q_list = {4};
  config.replications = 200;
  config.seed = seed;
  return run_experiment(config, workers);
}

inline const CellSummary& cell_for(const AggregateReport& report, std::size_t n) {
  for (const auto& c : report.cells)
    if (c.n == n) return c;
  throw std::logic_error("missing cell");
}

/// Median oracle ratio <= 2 at n = 2^13 and median(2^15) <= median(2^11).
inline CheckOutcome oracle_ratio(const AggregateReport& report, double seconds) {
  CheckOutcome out{7, "oracle-ratio study with C = C_W", true, "", seconds};
  const double small = cell_for(report, 2048).ratio.median;
  const double mid = cell_for(report, 8192).ratio.median;
  const double large = cell_for(report, 32768).ratio.median;
  const bool level_ok = mid <= 2.0;
  const bool trend_ok = large <= small;
  out.passed = level_ok && trend_ok && seconds < 1200.0;
  out.detail = "median ratio n=2^11: " + detail::fmt(small) + ", n=2^13: " + detail::fmt(mid) + " (<= 2: " +
               (level_ok ? "yes" : "no") + "), n=2^15: " + detail::fmt(large) + " (<= n=2^11 median: " +
               (trend_ok ? "yes" : "no") + ")";
  return out;
}

/// Slope-final median ratio within 1.5x of the resampling-penalty median.
inline CheckOutcome slope_quality(const AggregateReport& report) {
  CheckOutcome out{8, "slope-final selection quality", true, "", 0.0};
  const auto& cell = cell_for(report, 8192);
  out.passed = cell.slope_ratio.median <= 1.5 * cell.ratio.median;
  out.detail = "n=2^13 median slope ratio " + detail::fmt(cell.slope_ratio.median) + " vs resampling " +
               detail::fmt(cell.ratio.median) + " (limit x1.5), jump rate " + detail::fmt(cell.jump_rate);
  return out;
}

/// Kolmogorov-Smirnov distance of a sample to a CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// KS below the 1% critical value for every process kind at n = 1e5; AR
/// pre-warp mean within 3 se of 1/2.
inline CheckOutcome simulator_marginals(std::uint64_t seed = 9) {
  detail::Stopwatch clock;
  CheckOutcome out{9, "simulator marginals", true, "", 0.0};
  constexpr std::size_t n = 100000;
  // Asymptotic 1% critical value of the one-sample KS statistic.
  const double critical = 1.62762 / std::sqrt(static_cast<double>(n));
  const auto target = TrueDensity::linear();
  std::ostringstream text;
  bool ok = true;
  for (ProcessKind kind : {ProcessKind::iid, ProcessKind::ar_bernoulli, ProcessKind::gaussian_ar1}) {
    ProcessSpec spec;
    spec.kind = kind;
    spec.target = target;
    spec.seed = derive_seed(seed, {static_cast<std::uint64_t>(kind)});
    const double ks = ks_distance(simulate(spec, n), [&](double x) { return target.cdf(x); });
    ok = ok && ks < critical;
    text << to_string(kind) << " KS " << detail::fmt(ks) << "; ";
  }
  ProcessSpec latent;
  latent.kind = ProcessKind::ar_bernoulli;
  latent.seed = derive_seed(seed, {99});
  const auto u = simulate_latent(latent, n);
  double mean = 0.0;
  for (double v : u) mean += v / static_cast<double>(n);
  // Long-run variance of the chain: (1/12)(1 + 2 sum_k 2^-k) = 1/4.
  const double se = std::sqrt(0.25 / static_cast<double>(n));
  const bool mean_ok = std::abs(mean - 0.5) <= 3.0 * se;
  ok = ok && mean_ok;
  out.seconds = clock.seconds();
  out.passed = ok;
  text << "critical " << detail::fmt(critical) << "; pre-warp mean " << detail::fmt(mean, 6) << " (3se = "
       << detail::fmt(3.0 * se) << ")";
  out.detail = text.str();
  return out;
}

/// Runs the selected checks (all when @p ids is empty), calling @p report after each.
inline std::vector<CheckOutcome> run_checks(const std::vector<int>& ids,
                                            const std::function<void(const CheckOutcome&)>& report = {}) {
  auto wanted = [&](int id) { return ids.empty() || std::find(ids.begin(), ids.end(), id) != ids.end(); };
  std::vector<CheckOutcome> results;
  auto push = [&](CheckOutcome o) {
    if (report) report(o);
    results.push_back(std::move(o));
  };
  if (wanted(1)) push(penalty_exactness());
  if (wanted(2)) push(appendix_constants());
  if (wanted(3)) push(pythagoras());
  if (wanted(4)) push(expectation_link());
  if (wanted(5)) push(slope_monotonicity());
  if (wanted(6)) push(slope_jump());
  if (wanted(7) || wanted(8)) {
    detail::Stopwatch clock;
    const auto study = oracle_ratio_study();
    const double seconds = clock.seconds();
    if (wanted(7)) push(oracle_ratio(study, seconds));
    if (wanted(8)) push(slope_quality(study));
  }
  if (wanted(9)) push(simulator_marginals());
  return results;
}

inline std::string format_outcome(const CheckOutcome& o) {
  std::ostringstream out;
  out << (o.passed ? "[PASS] " : "[FAIL] ") << o.id << ". " << o.name << " -- " << o.detail << " ("
      << detail::fmt(o.seconds, 3) << " s)";
  return out.str();
}

}  // namespace mixsel::acceptance
