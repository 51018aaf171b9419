#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mixsel/penalty.hpp"
#include "mixsel/selection.hpp"

using namespace mixsel;
using Catch::Approx;

namespace {

BlockedSample random_blocked(std::size_t p, std::size_t q, unsigned seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> raw(2 * p * q);
  for (auto& x : raw) x = u(engine);
  return BlockedSample(raw, make_scheme(raw.size(), p, q));
}

// Monte-Carlo estimate of Var(W_1 - Wbar) from `draws` weight vectors.
double empirical_var_w1_minus_mean(const WeightLaw& law, std::size_t draws) {
  Engine engine(77);
  std::vector<double> w(law.p());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t b = 0; b < draws; ++b) {
    law.draw(engine, w);
    double mean = 0.0;
    for (double v : w) mean += v / static_cast<double>(w.size());
    const double d = w[0] - mean;
    sum += d;
    sum_sq += d * d;
  }
  const auto n = static_cast<double>(draws);
  return (sum_sq - sum * sum / n) / (n - 1.0);
}

// Exact E_W over every multinomial outcome of
//   2C sum_lambda (P_A^W - Wbar P_A) psi_lambda * P_A^W psi_lambda.
double exact_multinomial_penalty(const BlockedSample& sample, const Model& model, double C) {
  const std::size_t p = sample.scheme().p;
  const std::size_t dim = model.dimension();
  const auto L = block_mean_matrix(sample, model);
  std::vector<int> w(p, 0);
  double expectation = 0.0;
  const double log_pp = static_cast<double>(p) * std::log(static_cast<double>(p));
  std::function<void(std::size_t, int)> recurse = [&](std::size_t i, int remaining) {
    if (i + 1 == p) {
      w[i] = remaining;
      double log_prob = std::lgamma(static_cast<double>(p) + 1.0) - log_pp;
      for (int v : w) log_prob -= std::lgamma(v + 1.0);
      const double wbar = 1.0;
      double value = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        double pa = 0.0, paw = 0.0;
        for (std::size_t b = 0; b < p; ++b) {
          pa += L[b * dim + k] / static_cast<double>(p);
          paw += w[b] * L[b * dim + k] / static_cast<double>(p);
        }
        value += (paw - wbar * pa) * paw;
      }
      expectation += std::exp(log_prob) * 2.0 * C * value;
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      w[i] = v;
      recurse(i + 1, remaining - v);
    }
  };
  recurse(0, static_cast<int>(p));
  return expectation;
}

}  // namespace

TEST_CASE("c_tilde_w closed forms against Monte-Carlo variances") {
  const auto m2 = WeightLaw::multinomial(2);
  const auto m10 = WeightLaw::multinomial(10);
  const auto pois = WeightLaw::iid_poisson(10, 1.0);
  CHECK(c_tilde_w(m2) == 2.0);
  CHECK(c_tilde_w(m10) == Approx(10.0 / 9.0).epsilon(1e-15));
  CHECK(c_tilde_w(pois) == Approx(10.0 / 9.0).epsilon(1e-15));
  CHECK(c_tilde_w(WeightLaw::iid_exponential(4, 2.0)) == Approx(1.0 / (0.25 * 0.75)));

  constexpr std::size_t draws = 1000000;
  CHECK(1.0 / empirical_var_w1_minus_mean(m2, draws) == Approx(2.0).epsilon(0.01));
  CHECK(1.0 / empirical_var_w1_minus_mean(m10, draws) == Approx(10.0 / 9.0).epsilon(0.01));
  CHECK(1.0 / empirical_var_w1_minus_mean(pois, draws) == Approx(10.0 / 9.0).epsilon(0.01));
}

TEST_CASE("weight laws reject invalid parameters") {
  CHECK_THROWS_AS(WeightLaw::multinomial(1), std::invalid_argument);
  CHECK_THROWS_AS(WeightLaw::iid_poisson(4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(c_tilde_w(WeightLaw::point_mass(4, 1.0)), std::invalid_argument);
}

TEST_CASE("multinomial draws sum to p and are nonnegative") {
  Engine engine(5);
  const auto law = WeightLaw::multinomial(7);
  std::vector<double> w(7);
  for (int b = 0; b < 1000; ++b) {
    law.draw(engine, w);
    double s = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == 7.0);
  }
}

TEST_CASE("closed-form hand instance") {
  const auto sample = BlockedSample::from_blocks({{0.2}, {0.8}});
  const Model d2(CollectionKind::histogram, 2, 2);
  const auto law = WeightLaw::multinomial(2);
  const auto at1 = penalty_closed_form(sample, d2, law, 1.0);
  CHECK(at1.p_w == Approx(1.0).epsilon(1e-15));
  CHECK(at1.pen == Approx(1.0).epsilon(1e-15));
  CHECK(penalty_closed_form(sample, d2, law, 2.0).pen == Approx(2.0).epsilon(1e-15));
  CHECK(penalty_closed_form(sample, d2, law, 0.3).pen == Approx(0.3).epsilon(1e-15));
}

TEST_CASE("constant block means give a zero penalty") {
  const auto sample = random_blocked(9, 3, 1);
  const Model d1(CollectionKind::histogram, 1, 1);
  const auto rec = penalty_closed_form(sample, d1, WeightLaw::multinomial(9), 1.0);
  CHECK(rec.p_w == 0.0);
  CHECK(rec.pen == 0.0);
  const auto mc = penalty_monte_carlo(sample, d1, WeightLaw::multinomial(9), 1.0, 500, 3);
  CHECK(mc.pen == 0.0);
  CHECK(mc.standard_error == 0.0);
}

TEST_CASE("closed form equals the exact expectation over all multinomial outcomes") {
  int fixture = 0;
  for (std::size_t p : {2, 3, 4, 5}) {
    for (auto kind : {CollectionKind::histogram, CollectionKind::fourier, CollectionKind::haar}) {
      const auto sample = random_blocked(p, 1 + fixture % 3, 20 + fixture);
      ++fixture;
      const Model model(kind, 1, 3);
      const double C = 1.7;
      const auto rec = penalty_closed_form(sample, model, WeightLaw::multinomial(p), C);
      CHECK(rec.pen == Approx(exact_multinomial_penalty(sample, model, C)).epsilon(1e-12).margin(1e-15));
    }
  }
}

TEST_CASE("Monte-Carlo penalty matches the closed form") {
  const auto sample = BlockedSample::from_blocks({{0.2}, {0.8}});
  const Model d2(CollectionKind::histogram, 2, 2);
  const auto mc = penalty_monte_carlo(sample, d2, WeightLaw::multinomial(2), 2.0, 20000, 11);
  REQUIRE(mc.standard_error > 0.0);
  CHECK(std::abs(mc.pen - 2.0) <= 4.0 * mc.standard_error);
  CHECK(mc.replicates == 20000);

  const auto wide = random_blocked(12, 2, 8);
  const Model haar(CollectionKind::haar, 2, 2);
  for (auto law : {WeightLaw::multinomial(12), WeightLaw::iid_poisson(12, 2.0), WeightLaw::iid_exponential(12, 0.5)}) {
    const double C = c_tilde_w(law);
    const auto closed = penalty_closed_form(wide, haar, law, C);
    const auto sim = penalty_monte_carlo(wide, haar, law, C, 20000, 12);
    CHECK(std::abs(sim.pen - closed.pen) <= 4.0 * sim.standard_error);
  }
}

TEST_CASE("Monte-Carlo penalty is deterministic per seed and validates inputs") {
  const auto sample = random_blocked(6, 1, 9);
  const Model model(CollectionKind::fourier, 2, 2);
  const auto law = WeightLaw::multinomial(6);
  CHECK(penalty_monte_carlo(sample, model, law, 1.0, 200, 4).pen ==
        penalty_monte_carlo(sample, model, law, 1.0, 200, 4).pen);
  CHECK_THROWS_AS(penalty_monte_carlo(sample, model, law, 1.0, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(penalty_monte_carlo(sample, model, WeightLaw::multinomial(5), 1.0, 10, 4), std::invalid_argument);
  CHECK_THROWS_AS(penalty_monte_carlo(sample, model, WeightLaw::point_mass(6, 1.0), 1.0, 10, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(penalty_closed_form(sample, model, WeightLaw::point_mass(6, 1.0), 1.0), std::invalid_argument);
}

TEST_CASE("p_w does not depend on the weight law; pen scales with C") {
  const auto sample = random_blocked(15, 2, 10);
  const Model model(CollectionKind::haar, 3, 3);
  const auto m = penalty_closed_form(sample, model, WeightLaw::multinomial(15), 1.0);
  const auto e = penalty_closed_form(sample, model, WeightLaw::iid_exponential(15, 3.0), 1.0);
  CHECK(m.p_w == e.p_w);
  CHECK(m.pen / e.pen == Approx(c_tilde_w(WeightLaw::iid_exponential(15, 3.0)) / c_tilde_w(WeightLaw::multinomial(15))));
  const auto scaled = penalty_closed_form(sample, model, WeightLaw::multinomial(15), 4.0);
  CHECK(scaled.pen == 4.0 * m.pen);
}

TEST_CASE("p_w is non-decreasing along nested collections") {
  const auto sample = random_blocked(40, 2, 14);
  for (auto kind : {CollectionKind::fourier, CollectionKind::haar}) {
    double previous = 0.0;
    for (const auto& model : enumerate_models(kind, 160, 6).models) {
      const double pw = penalty_closed_form(sample, model, WeightLaw::multinomial(40), 1.0).p_w;
      CHECK(pw >= previous);
      previous = pw;
    }
  }
}

TEST_CASE("ideal penalty examples") {
  const Model d2(CollectionKind::histogram, 2, 2);
  CHECK(ideal_penalty(BlockedSample::from_blocks({{0.1}, {0.6}}), d2, TrueDensity::uniform()) ==
        Approx(0.0).margin(1e-15));
  CHECK(ideal_penalty(BlockedSample::from_blocks({{0.1}, {0.2}}), d2, TrueDensity::uniform()) == Approx(2.0));
  const std::vector<double> c{0.3, -0.2, 0.1};
  CHECK(ideal_penalty_from_coefficients(c, c, 3) == 0.0);
}

TEST_CASE("weight and method names parse") {
  CHECK(parse_weight_kind("multinomial") == WeightKind::multinomial);
  CHECK(parse_weight_kind("poisson") == WeightKind::poisson);
  CHECK(parse_penalty_method("closed") == PenaltyMethod::closed_form);
  CHECK(parse_penalty_method("monte-carlo") == PenaltyMethod::monte_carlo);
  CHECK_THROWS_AS(parse_penalty_method("bogus"), std::invalid_argument);
}
