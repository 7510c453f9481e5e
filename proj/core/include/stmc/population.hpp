#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>

#include "stmc/parallel.hpp"
#include "stmc/prior.hpp"
#include "stmc/rng.hpp"

namespace stmc {

// N weighted samples with cached per-sample evaluations. Columns are samples.
// log_like holds the raw (untempered) log-likelihood, zero when the run has
// no likelihood; failure holds f(theta), NaN when unused.
struct Population {
  Eigen::MatrixXd samples;    // d x N
  Eigen::VectorXd log_prior;  // N
  Eigen::VectorXd log_like;   // N
  Eigen::VectorXd failure;    // N
  Eigen::VectorXd weights;    // N, nonnegative
  int level = 0;
  double beta = 0.0;

  Eigen::Index size() const { return samples.cols(); }
  Eigen::Index dim() const { return samples.rows(); }

  static Population empty(Eigen::Index dim, Eigen::Index n) {
    Population p;
    p.samples.resize(dim, n);
    p.log_prior = Eigen::VectorXd::Zero(n);
    p.log_like = Eigen::VectorXd::Zero(n);
    p.failure = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    p.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    return p;
  }
};

// n i.i.d. prior draws with cached log-prior values. Draw i comes from its own
// stream, so the population is identical for any worker count.
inline Population sample_prior(const BlockPrior& prior, std::uint64_t seed, Eigen::Index n,
                               unsigned workers = 1) {
  if (n < 1) throw std::invalid_argument("sample_prior: need n >= 1");
  Population pop = Population::empty(static_cast<Eigen::Index>(prior.dim()), n);
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t i) {
        RngStream rs = chain_stream(seed, /*level=*/0, i);
        const Eigen::VectorXd draw = prior.sample(rs);
        pop.samples.col(static_cast<Eigen::Index>(i)) = draw;
        pop.log_prior[static_cast<Eigen::Index>(i)] = prior.log_pdf(draw);
      },
      workers);
  return pop;
}

}  // namespace stmc
