#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mixsel/blocks.hpp"

using namespace mixsel;
using Catch::Approx;

namespace {

std::vector<double> random_sample(std::size_t n, unsigned seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& x : out) x = u(engine);
  return out;
}

}  // namespace

TEST_CASE("make_blocks examples") {
  const auto s12 = make_blocks(12, 2);
  CHECK(s12.p == 3);
  CHECK(s12.q == 2);
  CHECK(s12.block_indices(0) == std::vector<std::size_t>{1, 2});
  CHECK(s12.block_indices(1) == std::vector<std::size_t>{5, 6});
  CHECK(s12.block_indices(2) == std::vector<std::size_t>{9, 10});
  CHECK(s12.discarded() == 0);

  const auto s8 = make_blocks(8, 1);
  CHECK(s8.p == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s8.block_indices(i) == std::vector<std::size_t>{2 * i + 1});

  const auto big = make_blocks(8192);
  // sqrt(8192) / (2 (ln 8192)^2) = 90.5 / 162.4 < 1, clamped to 1.
  const double raw = std::sqrt(8192.0) / (2.0 * std::pow(std::log(8192.0), 2));
  CHECK(raw < 1.0);
  CHECK(big.q == 1);
  CHECK(big.p == 4096);
  const double upper = std::sqrt(8192.0) * std::pow(std::log(8192.0), 2);
  CHECK(big.asymptotic_range_ok() == (upper / 2 <= 4096.0 && 4096.0 <= upper));
}

TEST_CASE("make_blocks truncates and rejects") {
  const auto s = make_blocks(13, 2);
  CHECK(s.p == 3);
  CHECK(s.discarded() == 1);
  CHECK(make_blocks(16, 4).p == 2);
  CHECK_THROWS_AS(make_blocks(16, 5), std::invalid_argument);
  CHECK_THROWS_AS(make_blocks(7, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_blocks(16, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_scheme(16, 1, 1), std::invalid_argument);
}

TEST_CASE("blocked samples reject values outside [0,1)") {
  CHECK_THROWS_AS(BlockedSample({0.1, 0.2, 1.0, 0.3}, make_scheme(4, 2, 1)), std::invalid_argument);
  CHECK_THROWS_AS(BlockedSample({0.1, -0.2, 0.5, 0.3}, make_scheme(4, 2, 1)), std::invalid_argument);
  CHECK_THROWS_AS(BlockedSample({0.1, 0.2, 0.5}, make_scheme(4, 2, 1)), std::invalid_argument);
}

TEST_CASE("block_means examples") {
  const Model d1(CollectionKind::histogram, 1, 1);
  const auto sample = BlockedSample(random_sample(40, 1), make_blocks(40, 1));
  for (double v : block_means(sample, d1, {0, 0})) CHECK(v == 1.0);

  const Model d2(CollectionKind::histogram, 2, 2);
  const auto one_block = BlockedSample::from_blocks({{0.1, 0.9}, {0.2, 0.3}});
  CHECK(block_means(one_block, d2, {0, 0})[0] == Approx(std::numbers::sqrt2 / 2));

  const Model haar2(CollectionKind::haar, 2, 2);
  const auto low = BlockedSample::from_blocks({{0.1, 0.7}, {0.74, 0.2}});
  for (double v : block_means(low, haar2, {2, 3})) CHECK(v == 0.0);
}

TEST_CASE("block_empirical examples") {
  const Model d2(CollectionKind::histogram, 2, 2);
  const auto two = BlockedSample::from_blocks({{0.2}, {0.8}});
  CHECK(block_empirical(two, d2, {0, 0}) == Approx(std::numbers::sqrt2 / 2));
  const auto right = BlockedSample::from_blocks({{0.6}, {0.8}});
  CHECK(block_empirical(right, d2, {0, 0}) == 0.0);
  CHECK_THROWS_AS(block_empirical(two, d2, {0, 2}), std::invalid_argument);
}

TEST_CASE("q = 1 block mean is the mean over odd-indexed points") {
  const auto raw = random_sample(200, 2);
  const BlockedSample sample(raw, make_blocks(200, 1));
  const Model model(CollectionKind::fourier, 3, 3);
  for (std::size_t pos = 0; pos < model.dimension(); ++pos) {
    double direct = 0.0;
    for (std::size_t t = 0; t < raw.size(); t += 2) direct += eval_position(model, pos, raw[t]);
    direct /= 100.0;
    CHECK(block_empirical(sample, model, model.label_at(pos)) == Approx(direct).margin(1e-14));
  }
}

TEST_CASE("P_A is linear") {
  const auto raw = random_sample(96, 3);
  const BlockedSample sample(raw, make_blocks(96, 3));
  const Model model(CollectionKind::haar, 3, 3);
  const double a = 0.37, b = -2.5;
  const BasisLabel t{2, 1}, u{3, 5};
  double combined = 0.0;
  for (std::size_t i = 0; i < sample.scheme().p; ++i)
    for (double x : sample.block(i)) combined += a * eval_basis(model, t, x) + b * eval_basis(model, u, x);
  combined /= static_cast<double>(sample.scheme().p * sample.scheme().q);
  CHECK(combined ==
        Approx(a * block_empirical(sample, model, t) + b * block_empirical(sample, model, u)).margin(1e-13));
}

TEST_CASE("permuting inside the gaps changes nothing") {
  auto raw = random_sample(120, 4);
  const auto scheme = make_blocks(120, 5);
  const Model model(CollectionKind::fourier, 4, 4);
  const auto before = block_statistics(BlockedSample(raw, scheme), model);
  std::mt19937_64 engine(9);
  for (std::size_t k = 0; k < scheme.p; ++k) {
    auto first = raw.begin() + static_cast<std::ptrdiff_t>((2 * k + 1) * scheme.q);
    std::shuffle(first, first + static_cast<std::ptrdiff_t>(scheme.q), engine);
    std::fill(first, first + 1, 0.999);
  }
  const auto after = block_statistics(BlockedSample(raw, scheme), model);
  CHECK(before.mean == after.mean);
  CHECK(before.centered_ss == after.centered_ss);
}

TEST_CASE("sparse block statistics match the dense matrix") {
  const auto raw = random_sample(300, 5);
  const BlockedSample sample(raw, make_blocks(300, 2));
  for (auto kind : {CollectionKind::histogram, CollectionKind::fourier, CollectionKind::haar}) {
    const Model model(kind, 4, 4);
    const auto stats = block_statistics(sample, model);
    const auto dense = block_mean_matrix(sample, model);
    const std::size_t dim = model.dimension();
    const std::size_t p = sample.scheme().p;
    for (std::size_t k = 0; k < dim; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < p; ++i) mean += dense[i * dim + k] / static_cast<double>(p);
      double ss = 0.0;
      for (std::size_t i = 0; i < p; ++i) ss += std::pow(dense[i * dim + k] - mean, 2);
      CHECK(stats.mean[k] == Approx(mean).margin(1e-13));
      CHECK(stats.centered_ss[k] == Approx(ss).margin(1e-12));
      CHECK(stats.centered_ss[k] >= 0.0);
    }
  }
}

TEST_CASE("scheme JSON reports the asymptotic range conflict") {
  const auto j = make_blocks(1000, 2).to_json();
  CHECK(j["p"] == 250);
  CHECK(j["discarded"] == 0);
  CHECK(j["asymptotic_range_ok"] == false);
}
