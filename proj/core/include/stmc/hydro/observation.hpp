#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "stmc/hydro/network.hpp"
#include "stmc/rng.hpp"
#include "stmc/target.hpp"

namespace stmc::hydro {

// Head observations at all demand nodes under several known demand
// conditions. Rows are conditions, columns follow the network's demand-node
// order. Observation noise is Gaussian with sd noise_sd (meters).
struct HeadObservationSet {
  Eigen::MatrixXd demand_factors;  // n_conditions x n_demand_nodes
  Eigen::MatrixXd observed_head;   // n_conditions x n_demand_nodes
  double noise_sd = 1.0;

  Eigen::Index n_conditions() const { return demand_factors.rows(); }
};

// CSV formats:
//   conditions:   condition_id,node_id,demand_factor
//   observations: condition_id,node_id,observed_head_m
HeadObservationSet load_observations(const NetworkSpec& net, const std::string& conditions_csv,
                                     const std::string& observations_csv, double noise_sd = 1.0);
void save_observations(const NetworkSpec& net, const HeadObservationSet& data,
                       const std::string& conditions_csv, const std::string& observations_csv);

// Predicted heads at the demand nodes for one condition; throws when the
// solve does not converge.
Eigen::VectorXd predict_heads(const NetworkSpec& net, const Eigen::VectorXd& demand_factors,
                              const LeakConfig& leaks);

struct SyntheticTruth {
  Eigen::VectorXd leak_coeff;    // per pipe
  Eigen::VectorXd leak_position; // per pipe
};

// Noisy synthetic dataset under prior-drawn demand conditions and a fixed
// leak truth. Seed controls conditions and noise; the generated set is
// persisted alongside run outputs so experiments are replayable.
HeadObservationSet make_synthetic_observations(const NetworkSpec& net, const SyntheticTruth& truth,
                                               Eigen::Index n_conditions, double noise_sd,
                                               double demand_factor_mean, double demand_factor_sd,
                                               std::uint64_t seed);

// Gaussian head-observation log-likelihood. One hydraulic solve per
// condition; the counter advances by the number of solves performed. A
// non-converged condition yields -inf.
std::shared_ptr<LogLikelihood> make_head_likelihood(std::shared_ptr<const NetworkSpec> net,
                                                    HeadObservationSet data);

// Failure function of the reliability problem (counter: one solve per call).
std::shared_ptr<FailureFn> make_failure_fn(std::shared_ptr<const NetworkSpec> net,
                                           double min_head_m = 30.0);

}  // namespace stmc::hydro
