#include <doctest.h>

#include <cmath>
#include <limits>

#include "stmc/population.hpp"
#include "stmc/prior.hpp"
#include "test_support.hpp"

using namespace stmc;

namespace {

std::shared_ptr<const BlockLayout> hanoi_like_layout() {
  auto layout = std::make_shared<BlockLayout>();
  layout->add_block("demand", 31);
  layout->add_block("leak_size", 34);
  layout->add_block("leak_pos", 34);
  return layout;
}

BlockPrior hanoi_like_prior() {
  std::vector<Marginal> m;
  append_block(m, 31, GaussianMarginal{0.75, 0.15});
  append_block(m, 34, ExponentialMarginal{0.002});
  append_block(m, 34, UniformMarginal{0.0, 1.0});
  return BlockPrior(hanoi_like_layout(), std::move(m));
}

}  // namespace

TEST_CASE("marginal log densities match closed forms") {
  CHECK(marginal_log_pdf(UniformMarginal{0.0, 1.0}, 0.5) == 0.0);
  CHECK(marginal_log_pdf(UniformMarginal{0.0, 1.0}, -0.01) ==
        -std::numeric_limits<double>::infinity());
  CHECK(marginal_log_pdf(ExponentialMarginal{0.002}, -0.001) ==
        -std::numeric_limits<double>::infinity());
  CHECK(marginal_log_pdf(ExponentialMarginal{0.002}, 0.0) == doctest::Approx(std::log(1.0 / 0.002)));

  // Gaussian mode value, recomputed independently.
  const double expected = std::log(1.0 / (0.15 * std::sqrt(2.0 * M_PI)));
  CHECK(marginal_log_pdf(GaussianMarginal{0.75, 0.15}, 0.75) ==
        doctest::Approx(expected).epsilon(1e-14));
  CHECK(marginal_log_pdf(GaussianMarginal{0.75, 0.15}, 0.9) ==
        doctest::Approx(stmc::test::normal_log_pdf(0.9, 0.75, 0.15)).epsilon(1e-14));
}

TEST_CASE("block prior log pdf sums the marginals and respects support") {
  const BlockPrior prior = hanoi_like_prior();
  REQUIRE(prior.dim() == 99);

  RngStream rng(42);
  const Eigen::VectorXd theta = prior.sample(rng);
  double expected = 0.0;
  for (std::size_t i = 0; i < prior.dim(); ++i)
    expected += prior.component_log_pdf(i, theta[static_cast<Eigen::Index>(i)]);
  CHECK(prior.log_pdf(theta) == expected);  // identical summation order, bit-equal

  Eigen::VectorXd bad = theta;
  bad[40] = -1.0;  // negative leak size
  CHECK(prior.log_pdf(bad) == -std::numeric_limits<double>::infinity());

  CHECK_THROWS_AS(prior.log_pdf(Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST_CASE("prior draws stay inside every marginal's support") {
  const BlockPrior prior = hanoi_like_prior();
  const Population pop = sample_prior(prior, 7, 1024);
  REQUIRE(pop.size() == 1024);
  REQUIRE(pop.dim() == 99);
  CHECK(pop.samples.middleRows(31, 34).minCoeff() >= 0.0);  // leak sizes
  CHECK(pop.samples.middleRows(65, 34).minCoeff() >= 0.0);  // positions
  CHECK(pop.samples.middleRows(65, 34).maxCoeff() <= 1.0);
  for (Eigen::Index i = 0; i < pop.size(); ++i) CHECK(std::isfinite(pop.log_prior[i]));
}

TEST_CASE("sampling is reproducible for a fixed seed and worker count independent") {
  const BlockPrior prior = hanoi_like_prior();
  const Population a = sample_prior(prior, 123, 64, 1);
  const Population b = sample_prior(prior, 123, 64, 2);
  CHECK(a.samples == b.samples);
  const Population c = sample_prior(prior, 124, 64, 1);
  CHECK(a.samples != c.samples);
}

TEST_CASE("exponential draws have the requested mean") {
  auto layout = std::make_shared<BlockLayout>();
  layout->add_block("x", 1);
  const BlockPrior prior(layout, {ExponentialMarginal{0.002}});
  const int n = 100000;
  RngStream rng(5);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += marginal_sample(ExponentialMarginal{0.002}, rng);
  const double mean = sum / n;
  const double se = 0.002 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - 0.002) < 3.0 * se);
}

TEST_CASE("block layout validates ranges") {
  BlockLayout layout;
  layout.add_block("a", 2);
  layout.add_block("b", 3);
  CHECK(layout.dim() == 5);
  CHECK(layout.block("b").offset == 2);
  CHECK_THROWS_AS(layout.add_block("a", 1), std::invalid_argument);
  CHECK_THROWS_AS(layout.block("zzz"), std::out_of_range);

  Eigen::VectorXd v(5);
  v << 1, 2, 3, 4, 5;
  CHECK(layout.view(v, "b")[0] == 3.0);
  CHECK_THROWS_AS(layout.view(Eigen::VectorXd::Zero(4), "b"), std::invalid_argument);
}
