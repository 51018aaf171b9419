#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "mixsel/estimator.hpp"

using namespace mixsel;
using Catch::Approx;

namespace {

// Composite 3-point Gauss-Legendre on `cells` equal cells: exact for
// piecewise polynomials of degree <= 5 whose breakpoints are cell edges.
double integrate(const std::function<double(double)>& f, std::size_t cells) {
  const double nodes[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double h = 1.0 / static_cast<double>(cells);
  double acc = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double mid = (static_cast<double>(c) + 0.5) * h;
    for (int k = 0; k < 3; ++k) acc += weights[k] * f(mid + 0.5 * h * nodes[k]);
  }
  return acc * 0.5 * h;
}

// Cell count aligned with every breakpoint of the model and of the test densities.
std::size_t aligned_cells(const Model& model) {
  switch (model.kind()) {
    case CollectionKind::histogram: return 4 * static_cast<std::size_t>(model.size()) * 64;
    case CollectionKind::haar: return std::size_t{1} << (model.size() + 3);
    case CollectionKind::fourier: return 4096;
  }
  return 0;
}

BlockedSample random_blocked(std::size_t p, std::size_t q, unsigned seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> raw(2 * p * q);
  for (auto& x : raw) x = std::sqrt(u(engine));
  return BlockedSample(raw, make_scheme(raw.size(), p, q));
}

const TrueDensity kKinked("piecewise-polynomial", {0.0, 0.25, 1.0}, {{0.4}, {0.2, 1.6}});

}  // namespace

TEST_CASE("projection examples") {
  const auto sample = BlockedSample::from_blocks({{0.1}, {0.6}});
  for (auto kind : {CollectionKind::histogram, CollectionKind::haar}) {
    const Model model = kind == CollectionKind::histogram ? Model(kind, 2, 2) : Model(kind, 1, 1);
    const auto fit = project(sample, model);
    CHECK(fit.coefficients[0] == Approx(std::numbers::sqrt2 / 2));
    CHECK(fit.coefficients[1] == Approx(std::numbers::sqrt2 / 2));
    if (kind == CollectionKind::histogram) {
      CHECK(fit.contrast == Approx(-1.0));
      CHECK(evaluate_density(fit, 0.3) == Approx(1.0));
      CHECK(evaluate_density(fit, 0.9) == Approx(1.0));
    }
  }
  const auto any = random_blocked(7, 3, 11);
  const auto d1 = project(any, Model(CollectionKind::histogram, 1, 1));
  CHECK(d1.coefficients[0] == 1.0);
  CHECK(d1.contrast == -1.0);
}

TEST_CASE("evaluate_density examples") {
  const Model haar(CollectionKind::haar, 1, 1);
  CHECK(evaluate_density(make_fit(haar, std::vector<double>(4, 0.0)), 0.42) == 0.0);
  std::vector<double> single(4, 0.0);
  single[*haar.position({1, 0})] = 1.0;
  CHECK(evaluate_density(make_fit(haar, single), 0.1) == Approx(std::numbers::sqrt2));
  CHECK_THROWS_AS(make_fit(haar, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("risk examples") {
  const auto any = random_blocked(5, 2, 12);
  const auto flat = risk_against(project(any, Model(CollectionKind::histogram, 1, 1)), TrueDensity::uniform());
  CHECK(flat.total == 0.0);
  CHECK(flat.bias == 0.0);

  const auto sample = BlockedSample::from_blocks({{0.1}, {0.6}});
  const auto d2 = risk_against(project(sample, Model(CollectionKind::histogram, 2, 2)), TrueDensity::uniform());
  CHECK(d2.variance == Approx(0.0).margin(1e-15));
  CHECK(d2.total == Approx(0.0).margin(1e-15));

  // ||2y||^2 - (int 2y)^2 = 4/3 - 1.
  const auto lin = risk_against(project(any, Model(CollectionKind::histogram, 1, 1)), TrueDensity::linear());
  CHECK(lin.bias == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(lin.variance == Approx(0.0).margin(1e-15));
}

TEST_CASE("risk agrees with direct quadrature and splits by Pythagoras") {
  std::mt19937_64 engine(13);
  const TrueDensity densities[] = {TrueDensity::linear(), kKinked};
  int fixture = 0;
  for (auto kind : {CollectionKind::histogram, CollectionKind::fourier, CollectionKind::haar}) {
    for (const auto& truth : densities) {
      for (int size : {1, 2, 3, 5}) {
        const Model model(kind, 1, size);
        const auto sample = random_blocked(10 + fixture, 1 + fixture % 3, 100 + fixture);
        ++fixture;
        const auto fit = project(sample, model);
        const auto risk = risk_against(fit, truth);
        const double direct = integrate(
            [&](double x) { return std::pow(truth(x) - evaluate_density(fit, x), 2); }, aligned_cells(model));
        CHECK(risk.total == Approx(direct).margin(1e-10));
        CHECK(std::abs(risk.total - risk.bias - risk.variance) <= 1e-12);
        CHECK(risk.bias >= 0.0);
        CHECK(risk.variance >= 0.0);
      }
    }
  }
}

TEST_CASE("contrast identity by function-space quadrature") {
  int fixture = 0;
  for (auto kind : {CollectionKind::histogram, CollectionKind::fourier, CollectionKind::haar}) {
    for (int size : {1, 2, 4, 6}) {
      const Model model(kind, 1, size);
      const auto sample = random_blocked(8 + fixture, 1 + fixture % 4, 200 + fixture);
      ++fixture;
      const auto fit = project(sample, model);
      const double norm2 =
          integrate([&](double x) { return std::pow(evaluate_density(fit, x), 2); }, aligned_cells(model));
      double pa = 0.0;
      for (std::size_t i = 0; i < sample.scheme().p; ++i)
        for (double x : sample.block(i)) pa += evaluate_density(fit, x);
      pa /= static_cast<double>(sample.scheme().p * sample.scheme().q);
      CHECK(norm2 - 2.0 * pa == Approx(fit.contrast).margin(1e-8));
    }
  }
}

TEST_CASE("bias is non-increasing along nested collections") {
  const TrueDensity densities[] = {TrueDensity::uniform(), TrueDensity::linear(), kKinked};
  for (const auto& truth : densities) {
    for (auto kind : {CollectionKind::fourier, CollectionKind::haar}) {
      double previous = truth.squared_norm();
      for (const auto& model : enumerate_models(kind, 64, 8).models) {
        const auto c = truth.coefficients(model);
        const double bias = truth.squared_norm() - sum_of_squares(c, c.size());
        CHECK(bias <= previous + 1e-13);
        previous = bias;
      }
    }
    // Histograms nest only along divisibility chains.
    double previous = truth.squared_norm();
    for (int d = 1; d <= 64; d *= 2) {
      const auto c = truth.coefficients(Model(CollectionKind::histogram, 1, d));
      const double bias = truth.squared_norm() - sum_of_squares(c, c.size());
      CHECK(bias <= previous + 1e-13);
      previous = bias;
    }
  }
}
