#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mixsel/processes.hpp"
#include "mixsel/selection.hpp"

using namespace mixsel;
using Catch::Approx;

namespace {

CriterionRow row(std::size_t index, std::size_t dim, double contrast, double pen) {
  CriterionRow r;
  r.model_index = index;
  r.dim = dim;
  r.contrast = contrast;
  r.pen = pen;
  return r;
}

BlockedSample simulated(ProcessKind kind, const TrueDensity& target, std::size_t n, std::size_t q,
                        std::uint64_t seed) {
  ProcessSpec spec;
  spec.kind = kind;
  spec.target = target;
  spec.seed = seed;
  return BlockedSample(simulate(spec, n), make_blocks(n, q));
}

}  // namespace

TEST_CASE("select_model examples") {
  const auto report = select_model({row(1, 4, -1.0, 0.05), row(2, 8, -1.2, 0.30)});
  CHECK(report.selected_row().model_index == 1);
  CHECK(report.selected_row().crit() == Approx(-0.95));

  const auto tie = select_model({row(2, 8, -1.0, 0.5), row(1, 4, -1.0, 0.5)});
  CHECK(tie.selected_row().dim == 4);
  const auto same_dim = select_model({row(3, 4, -1.0, 0.5), row(2, 4, -1.0, 0.5)});
  CHECK(same_dim.selected_row().model_index == 2);
}

TEST_CASE("select_model errors") {
  CHECK_THROWS_AS(select_model({}), std::invalid_argument);
  CHECK_THROWS_AS(select_model({row(1, 1, std::nan(""), 0.0)}), std::invalid_argument);
  CHECK_THROWS_AS(select_model({row(1, 1, 0.0, std::numeric_limits<double>::infinity())}), std::invalid_argument);
}

TEST_CASE("zero penalty selects the largest model on a nested informative collection") {
  const auto sample = simulated(ProcessKind::iid, TrueDensity::linear(), 512, 1, 3);
  const auto collection = enumerate_models(CollectionKind::haar, 512, 6);
  const auto summaries = summarize_collection(sample, collection);
  const auto report = select_model(criterion_rows(summaries, 0.0, 1.0));
  CHECK(report.selected_row().model_index == collection.models.back().index());
}

TEST_CASE("adding a constant to every penalty keeps the selection") {
  std::mt19937_64 engine(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int f = 0; f < 100; ++f) {
    std::vector<CriterionRow> rows;
    for (std::size_t m = 1; m <= 12; ++m) rows.push_back(row(m, 2 * m, u(engine), std::abs(u(engine))));
    auto shifted = rows;
    for (auto& r : shifted) r.pen += 0.25;
    CHECK(select_model(rows).selected == select_model(shifted).selected);
  }
}

TEST_CASE("oracle attachment") {
  auto a = row(1, 1, -1.0, 0.0);
  auto b = row(2, 2, -0.5, 0.0);
  a.risk = 0.2;
  b.risk = 0.1;
  const auto report = select_model({a, b});
  REQUIRE(report.oracle);
  CHECK(report.rows[*report.oracle].model_index == 2);
  CHECK(*report.oracle_ratio == Approx(2.0));
  CHECK(report.summary_json()["ratio"] == Approx(2.0));

  auto c = row(1, 1, -1.0, 0.0);
  c.risk = 0.0;
  CHECK(*select_model({c}).oracle_ratio == 1.0);
  CHECK_FALSE(select_model({row(1, 1, 0.0, 0.0)}).oracle);
}

TEST_CASE("uniform truth with histograms: ratio 1 whenever d = 1 is selected") {
  const auto collection = enumerate_models(CollectionKind::histogram, 256, 16);
  PenaltyConfig config;
  int d1_selected = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sample = simulated(ProcessKind::ar_bernoulli, TrueDensity::uniform(), 256, 2, seed);
    const auto report = run_ppe(sample, collection, config, TrueDensity::uniform());
    CHECK(report.rows.front().risk == 0.0);
    CHECK(report.rows[*report.oracle].dim == 1);
    if (report.selected_row().dim == 1) {
      ++d1_selected;
      CHECK(*report.oracle_ratio == 1.0);
    }
    CHECK(*report.oracle_ratio >= 1.0);
  }
  CHECK(d1_selected > 0);
}

TEST_CASE("single-model collection") {
  const auto sample = simulated(ProcessKind::iid, TrueDensity::linear(), 64, 1, 5);
  ModelCollection one{CollectionKind::fourier, {Model(CollectionKind::fourier, 3, 3)}};
  const auto report = run_ppe(sample, one, PenaltyConfig{}, TrueDensity::linear());
  CHECK(report.selected_row().model_index == 3);
  CHECK(*report.oracle_ratio == 1.0);
}

TEST_CASE("run_ppe rows agree with the per-model closed form and exact risk") {
  const auto sample = simulated(ProcessKind::ar_bernoulli, TrueDensity::linear(), 1024, 4, 6);
  for (auto kind : {CollectionKind::histogram, CollectionKind::fourier, CollectionKind::haar}) {
    const auto collection = enumerate_models(kind, 1024, 7);
    PenaltyConfig config;
    config.multiplier = 1.3;
    const auto report = run_ppe(sample, collection, config, TrueDensity::linear());
    const auto law = WeightLaw::multinomial(sample.scheme().p);
    for (std::size_t i = 0; i < collection.models.size(); ++i) {
      const auto& model = collection.models[i];
      const auto rec = penalty_closed_form(sample, model, law, 1.3 * c_tilde_w(law));
      const auto fit = project(sample, model);
      const auto risk = risk_against(fit, TrueDensity::linear());
      CHECK(report.rows[i].pen == Approx(rec.pen).epsilon(1e-12));
      CHECK(report.rows[i].contrast == Approx(fit.contrast).epsilon(1e-12));
      CHECK(*report.rows[i].risk == Approx(risk.total).epsilon(1e-9).margin(1e-15));
      CHECK(*report.rows[i].ideal_pen == Approx(ideal_penalty(sample, model, TrueDensity::linear())).margin(1e-12));
    }
  }
}

TEST_CASE("run_ppe is deterministic, including the Monte-Carlo method") {
  const auto sample = simulated(ProcessKind::gaussian_ar1, TrueDensity::linear(), 512, 2, 7);
  const auto collection = enumerate_models(CollectionKind::haar, 512, 5);
  PenaltyConfig config;
  config.method = PenaltyMethod::monte_carlo;
  config.replicates = 300;
  config.seed = 99;
  const auto a = run_ppe(sample, collection, config);
  const auto b = run_ppe(sample, collection, config);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].pen == b.rows[i].pen);
    CHECK(a.rows[i].standard_error == b.rows[i].standard_error);
    CHECK(a.rows[i].standard_error > 0.0);
  }
  CHECK(a.selected == b.selected);
}

TEST_CASE("explicit constant overrides the multiplier") {
  PenaltyConfig config;
  config.multiplier = 3.0;
  config.constant = 0.5;
  CHECK(config.constant_for(WeightLaw::multinomial(4)) == 0.5);
  config.constant.reset();
  CHECK(config.constant_for(WeightLaw::multinomial(4)) == Approx(4.0));
}
