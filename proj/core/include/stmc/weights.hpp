#pragma once

#include <Eigen/Dense>
#include <vector>

#include "stmc/rng.hpp"

namespace stmc {

// Coefficient of variation of the incremental importance weights
// exp(delta_beta * loglike), computed on max-shifted exponents (COV is
// scale invariant, so the shift only buys overflow safety).
double weight_cov(const Eigen::VectorXd& loglike, double delta_beta);

// Largest annealing increment whose weight COV does not exceed kappa_star,
// found by bisection on [0, 1 - beta_prev]; returns the cap when even the
// full remaining increment stays below the threshold (final level).
double solve_delta_beta(const Eigen::VectorXd& loglike, double beta_prev, double kappa_star);

// Self-normalized importance weights exp(delta_beta*l_i - logsumexp).
Eigen::VectorXd normalized_weights(const Eigen::VectorXd& loglike, double delta_beta);

// log( mean_i exp(delta_beta * l_i) ): the per-level evidence increment.
double log_mean_exp(const Eigen::VectorXd& loglike, double delta_beta);

// Effective sample size 1 / sum(w_i^2) of normalized weights.
double effective_sample_size(const Eigen::VectorXd& normalized);

// N ancestor indices drawn with replacement, P(pick j) = w_j.
std::vector<Eigen::Index> multinomial_resample(const Eigen::VectorXd& normalized_weights,
                                               Eigen::Index n, RngStream& rng);

// Threshold such that a kappa fraction of the failure values strictly
// exceeds it (ascending order statistic ceil((1-kappa)N), ties resolved so
// that at least kappa*N samples satisfy f >= threshold); clamped to 1.
double solve_failure_threshold(const Eigen::VectorXd& failure_values, double kappa);

// Predicted ESS trajectory n_0 = N, n_{k+1} = n_k N / ((N-1)(1+kappa^2)rho^2 + n_k),
// plus the large-N stationary value N [1 - (1+kappa^2) rho^2] (zero when the
// learning condition rho^2 < 1/(1+kappa^2) fails).
struct EssPrediction {
  std::vector<double> trajectory;  // levels+1 entries, starting at N
  double fixed_point = 0.0;
  bool learning = false;  // rho^2 < 1/(1+kappa^2)
};

EssPrediction predict_ess(double kappa, double rho, double n, int levels);

}  // namespace stmc
