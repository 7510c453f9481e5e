#pragma once

#include <memory>
#include <optional>
#include <stdexcept>

#include "stmc/controller.hpp"
#include "stmc/correlation.hpp"
#include "stmc/kernels.hpp"
#include "stmc/population.hpp"
#include "stmc/schedule.hpp"
#include "stmc/target.hpp"
#include "stmc/weights.hpp"

namespace stmc {

// A run exceeded its level budget before finishing the anneal (the target
// probability is too small for the configured budget, or the chains stalled).
struct ConvergenceAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CorrMeasure { Cca, LogTarget };

struct EngineConfig {
  KernelKind kernel = KernelKind::Romma;
  Eigen::Index n_chains = 1024;
  double kappa_star = 1.0;  // target weight COV for annealing increments
  double kappa = 0.5;       // subset sampling fraction
  double rho_target = 0.6;
  std::optional<CorrMeasure> corr_measure;  // default: CCA updating, log-target subset
  double sigma0 = 1.0;
  double alpha_target = 0.234;
  double gain = 2.1;
  int corr_block = 5;      // steps between correlation checks
  int max_chain_len = 200; // per level
  int max_levels = 40;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct EvolveResult {
  AcceptanceStats stats;
  int chain_len = 0;
  double corr_final = 0.0;
  bool cap_hit = false;
};

// Advance all chains of `pop` under `target` in blocks of cfg.corr_block
// steps until the start/end correlation drops to rho_target or the per-level
// cap is hit. Population caches are kept in sync with the chain states.
// `level_key` isolates the per-chain RNG streams of this level.
EvolveResult evolve_level(Population& pop, const TemperedTarget& target,
                          const ProposalSpec& prop, const EngineConfig& cfg,
                          CorrMeasure measure, std::uint64_t level_key);

struct UpdatingResult {
  Population posterior;
  LevelSchedule schedule;
  double log_evidence = 0.0;
};

// Tempered Bayesian updating: anneal the likelihood exponent from 0 to 1
// with COV-controlled increments, resampling and decorrelating at each level.
UpdatingResult run_updating(std::shared_ptr<const BlockPrior> prior,
                            std::shared_ptr<const LogLikelihood> likelihood,
                            const EngineConfig& cfg);

struct SubsetResult {
  double p_hat = 0.0;
  double sigma_hat = 0.0;  // delta-method sampling std of p_hat (no mixing bias)
  Population failure_population;
  LevelSchedule schedule;
  int levels = 0;
};

// Nested failure-domain annealing (modified Subset Simulation). When
// `seed_population` is given it must hold samples of the base distribution
// (log-likelihood caches included if `likelihood` is set); otherwise the run
// starts from fresh prior draws. `likelihood` switches the intermediate
// targets from 1{f>=b} p(theta) to 1{f>=b} p(theta) L(theta).
SubsetResult run_subset(std::shared_ptr<const BlockPrior> prior,
                        std::shared_ptr<const FailureFn> failure,
                        std::shared_ptr<const LogLikelihood> likelihood,
                        const EngineConfig& cfg,
                        std::optional<Population> seed_population = std::nullopt,
                        std::uint64_t phase_key = 0);

struct PosteriorReliabilityResult {
  UpdatingResult updating;
  SubsetResult subset;
};

// Updating followed by failure annealing seeded with the posterior samples.
PosteriorReliabilityResult run_posterior_reliability(std::shared_ptr<const BlockPrior> prior,
                                                     std::shared_ptr<const LogLikelihood> likelihood,
                                                     std::shared_ptr<const FailureFn> failure,
                                                     const EngineConfig& cfg);

// Sum of the recorded per-level evidence increments.
double estimate_evidence(const LevelSchedule& schedule);

}  // namespace stmc
