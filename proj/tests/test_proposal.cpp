#include <doctest.h>

#include <Eigen/Dense>

#include "stmc/proposal.hpp"
#include "stmc/rng.hpp"

using namespace stmc;

TEST_CASE("matrix sqrt handles the easy closed forms") {
  CHECK(matrix_sqrt(Eigen::MatrixXd::Identity(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3)));

  Eigen::MatrixXd d(2, 2);
  d << 4.0, 0.0, 0.0, 9.0;
  Eigen::MatrixXd expected(2, 2);
  expected << 2.0, 0.0, 0.0, 3.0;
  CHECK(matrix_sqrt(d).isApprox(expected, 1e-14));
}

TEST_CASE("matrix sqrt reconstructs random SPD matrices") {
  RngStream rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::MatrixXd g(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) g(i, j) = rng.normal();
    const Eigen::MatrixXd sigma = g * g.transpose();
    const Eigen::MatrixXd root = matrix_sqrt(sigma);
    const double err = (root * root.transpose() - sigma).norm() / sigma.norm();
    CHECK(err < 1e-10);
    CHECK(root.isApprox(root.transpose(), 1e-12));
  }
}

TEST_CASE("matrix sqrt clamps indefinite input and rejects asymmetry") {
  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -0.5;
  const Eigen::MatrixXd root = matrix_sqrt(indef);
  Eigen::MatrixXd clamped(2, 2);
  clamped << 1.0, 0.0, 0.0, 0.0;
  CHECK((root * root.transpose()).isApprox(clamped, 1e-12));

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(matrix_sqrt(asym), std::invalid_argument);
  CHECK_THROWS_AS(matrix_sqrt(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("weighted covariance matches the hand-computed three-point case") {
  Eigen::MatrixXd samples(2, 3);
  samples << 1.0, 2.0, 3.0,
             2.0, 1.0, 0.0;
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(3);
  const Eigen::MatrixXd cov = weighted_covariance(samples, w);
  // mean (2,1); population covariance: var_x = 2/3, var_y = 2/3, cov = -2/3
  CHECK(cov(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(cov(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(cov(0, 1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("weighted covariance is invariant to weight rescaling") {
  RngStream rng(77);
  Eigen::MatrixXd samples(3, 20);
  Eigen::VectorXd w(20);
  for (int j = 0; j < 20; ++j) {
    for (int i = 0; i < 3; ++i) samples(i, j) = rng.normal();
    w[j] = rng.uniform();
  }
  const Eigen::MatrixXd a = weighted_covariance(samples, w);
  const Eigen::MatrixXd b = weighted_covariance(samples, 8.0 * w);
  CHECK(a == b);  // normalization makes the scale drop out exactly
}

TEST_CASE("single informative weight leaves only jitter") {
  Eigen::MatrixXd samples(2, 4);
  samples << 1.0, 5.0, -2.0, 0.5,
             0.0, 3.0, 4.0, -1.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
  w[2] = 2.5;
  const Eigen::MatrixXd cov = weighted_covariance(samples, w);
  CHECK(cov(0, 1) == 0.0);
  CHECK(cov(0, 0) == cov(1, 1));  // pure diagonal jitter
  CHECK(cov(0, 0) >= 0.0);
  CHECK(cov(0, 0) < 1e-12);

  CHECK_THROWS_AS(weighted_covariance(samples, Eigen::VectorXd::Zero(4)), std::invalid_argument);
  Eigen::VectorXd neg = Eigen::VectorXd::Ones(4);
  neg[1] = -0.1;
  CHECK_THROWS_AS(weighted_covariance(samples, neg), std::invalid_argument);
}

TEST_CASE("proposal construction validates scale and shape") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 2.0, 0.5, 0.5, 1.0;
  const ProposalSpec full = make_full_proposal(sigma, 0.7);
  CHECK_FALSE(full.diagonal);
  CHECK((full.root * full.root.transpose()).isApprox(sigma, 1e-10));
  CHECK(full.scale == 0.7);

  const ProposalSpec diag = make_diagonal_proposal(Eigen::Vector2d(4.0, 9.0), 1.0);
  CHECK(diag.diagonal);
  CHECK(diag.diag_sd[0] == 2.0);
  CHECK(diag.diag_sd[1] == 3.0);

  CHECK_THROWS_AS(make_full_proposal(sigma, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_diagonal_proposal(Eigen::Vector2d(-1.0, 1.0), 1.0), std::invalid_argument);
}
