#include "stmc/engine.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>
#include <vector>

namespace stmc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t counter_total(const std::shared_ptr<const LogLikelihood>& like,
                            const std::shared_ptr<const FailureFn>& fail) {
  std::uint64_t n = 0;
  if (like) n += like->eval_count();
  if (fail) n += fail->eval_count();
  return n;
}

// Finite part of the log target (indicator factor omitted; every tracked
// sample is in-domain by construction).
double log_target_value(double log_prior, double log_like, const TemperedTarget& t) {
  if (t.kind == TargetKind::Exponent) return log_prior + t.beta * log_like;
  return t.likelihood ? log_prior + log_like : log_prior;
}

Population gather(const Population& pop, const std::vector<Eigen::Index>& ancestors) {
  const auto n = static_cast<Eigen::Index>(ancestors.size());
  Population out = Population::empty(pop.dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = ancestors[static_cast<std::size_t>(i)];
    out.samples.col(i) = pop.samples.col(j);
    out.log_prior[i] = pop.log_prior[j];
    out.log_like[i] = pop.log_like[j];
    out.failure[i] = pop.failure[j];
  }
  out.level = pop.level;
  out.beta = pop.beta;
  return out;
}

AcceptanceStats aggregate_stats(const std::vector<ChainState>& chains, KernelKind kernel) {
  AcceptanceStats stats;
  std::uint64_t steps = 0, accepts = 0;
  for (const auto& c : chains) {
    steps += c.steps;
    accepts += c.stage2_accepts;
  }
  stats.stage2_rate = steps > 0 ? static_cast<double>(accepts) / static_cast<double>(steps) : 0.0;
  if (kernel == KernelKind::Rwm || chains.empty()) {
    stats.min_component_rate = stats.stage2_rate;
    return stats;
  }
  const Eigen::Index d = chains.front().through_accepts.size();
  Eigen::ArrayXd through = Eigen::ArrayXd::Zero(d);
  for (const auto& c : chains) through += c.through_accepts.cast<double>();
  stats.per_component_through_rate =
      steps > 0 ? (through / static_cast<double>(steps)).eval() : through;
  stats.min_component_rate = stats.per_component_through_rate.minCoeff();
  return stats;
}

// Sampling-variance bookkeeping for the failure-probability estimator.
// Chains descending from the same initial sample form an ancestral family;
// the replication scheme keeps that ancestry deterministic, and distinct
// families never interact (conditional on the shared thresholds and
// proposals), so they are the independent blocks of the run. Each level adds
// a relative deviation d_f = (S_f - n_f p) / (N p) per family to a running
// "luck" tally, and var(log p_hat) is estimated by sum_f (sum_k d_f^k)^2 -
// the cluster estimator including the correlation between levels that a
// per-level sum would miss. Mixing bias remains uncaptured.
void accumulate_family_luck(const std::vector<int>& families, const std::vector<char>& indicator,
                            double p, Eigen::VectorXd& luck) {
  const std::size_t n = indicator.size();
  if (!(p > 0.0) || !(p < 1.0)) return;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(luck.size());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(luck.size());
  for (std::size_t i = 0; i < n; ++i) {
    sum[families[i]] += indicator[i];
    count[families[i]] += 1.0;
  }
  luck += (sum - count * p) / (static_cast<double>(n) * p);
}

void evaluate_missing_failures(Population& pop, const FailureFn& failure, unsigned workers) {
  parallel_for(
      static_cast<std::size_t>(pop.size()),
      [&](std::size_t i) {
        const auto idx = static_cast<Eigen::Index>(i);
        if (std::isnan(pop.failure[idx])) pop.failure[idx] = failure(pop.samples.col(idx));
      },
      workers);
}

}  // namespace

std::string LevelSchedule::to_jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::json j{
        {"level", r.level},
        {"beta", r.beta},
        {"delta_beta", r.delta_beta},
        {"weight_cov", r.weight_cov},
        {"ess", r.ess},
        {"log_evidence_inc", r.log_evidence_inc},
        {"level_prob", r.level_prob},
        {"rel_var_inc", r.rel_var_inc},
        {"stage2_rate", r.stage2_rate},
        {"min_component_rate", r.min_component_rate},
        {"chain_len", r.chain_len},
        {"corr_final", r.corr_final},
        {"corr_cap_hit", r.corr_cap_hit},
        {"sigma", r.sigma},
        {"model_evals", r.model_evals},
        {"wall_seconds", r.wall_seconds},
    };
    out += j.dump();
    out += '\n';
  }
  return out;
}

EvolveResult evolve_level(Population& pop, const TemperedTarget& target, const ProposalSpec& prop,
                          const EngineConfig& cfg, CorrMeasure measure, std::uint64_t level_key) {
  const Eigen::Index n = pop.size();
  const Eigen::Index d = pop.dim();

  std::vector<ChainState> chains(static_cast<std::size_t>(n));
  std::vector<RngStream> streams;
  streams.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& c = chains[static_cast<std::size_t>(i)];
    c.theta = pop.samples.col(i);
    c.log_prior = pop.log_prior[i];
    c.log_like = pop.log_like[i];
    c.failure_value = pop.failure[i];
    c.stage1_accepts = Eigen::ArrayXi::Zero(d);
    c.through_accepts = Eigen::ArrayXi::Zero(d);
    streams.push_back(chain_stream(cfg.seed, level_key, static_cast<std::uint64_t>(i)));
  }

  const Eigen::MatrixXd start = pop.samples;
  Eigen::VectorXd v0(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v0[i] = log_target_value(pop.log_prior[i], pop.log_like[i], target);

  EvolveResult result;
  Eigen::MatrixXd current(d, n);
  Eigen::VectorXd v1(n);
  int steps = 0;
  while (true) {
    const int block = std::min(cfg.corr_block, cfg.max_chain_len - steps);
    parallel_for(
        static_cast<std::size_t>(n),
        [&](std::size_t i) {
          for (int b = 0; b < block; ++b)
            kernel_step(cfg.kernel, chains[i], target, prop, streams[i]);
        },
        cfg.workers);
    steps += block;

    double corr = 0.0;
    if (measure == CorrMeasure::Cca) {
      for (Eigen::Index i = 0; i < n; ++i)
        current.col(i) = chains[static_cast<std::size_t>(i)].theta;
      corr = corr_cca(start, current).value;
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& c = chains[static_cast<std::size_t>(i)];
        v1[i] = log_target_value(c.log_prior, c.log_like, target);
      }
      corr = corr_loglike(v0, v1).value;
    }
    result.corr_final = corr;
    if (corr <= cfg.rho_target) break;
    if (steps >= cfg.max_chain_len) {
      result.cap_hit = true;
      break;
    }
  }
  result.chain_len = steps;

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = chains[static_cast<std::size_t>(i)];
    pop.samples.col(i) = c.theta;
    pop.log_prior[i] = c.log_prior;
    pop.log_like[i] = c.log_like;
    pop.failure[i] = c.failure_value;
  }
  result.stats = aggregate_stats(chains, cfg.kernel);
  return result;
}

UpdatingResult run_updating(std::shared_ptr<const BlockPrior> prior,
                            std::shared_ptr<const LogLikelihood> likelihood,
                            const EngineConfig& cfg) {
  if (!prior || !likelihood)
    throw std::invalid_argument("run_updating: prior and likelihood required");

  const auto t_init = Clock::now();
  std::uint64_t evals_mark = counter_total(likelihood, nullptr);
  Population pop = sample_prior(*prior, cfg.seed, cfg.n_chains, cfg.workers);
  parallel_for(
      static_cast<std::size_t>(cfg.n_chains),
      [&](std::size_t i) {
        const auto idx = static_cast<Eigen::Index>(i);
        pop.log_like[idx] = (*likelihood)(pop.samples.col(idx));
      },
      cfg.workers);

  UpdatingResult out;
  LevelRecord init;
  init.level = 0;
  init.beta = 0.0;
  init.model_evals = counter_total(likelihood, nullptr) - evals_mark;
  init.wall_seconds = seconds_since(t_init);
  out.schedule.rows.push_back(init);

  const CorrMeasure measure = cfg.corr_measure.value_or(CorrMeasure::Cca);
  ControllerState ctrl{cfg.sigma0, cfg.alpha_target, cfg.gain};
  RngStream orch = orchestrator_stream(cfg.seed);
  double beta = 0.0;
  int level = 0;

  while (beta < 1.0) {
    if (level >= cfg.max_levels)
      throw ConvergenceAbort("run_updating: level budget exhausted at beta=" +
                             std::to_string(beta));
    ++level;
    const auto t_level = Clock::now();
    evals_mark = counter_total(likelihood, nullptr);

    const double cap = 1.0 - beta;
    const double delta_beta = solve_delta_beta(pop.log_like, beta, cfg.kappa_star);
    const double cov_achieved = weight_cov(pop.log_like, delta_beta);
    const Eigen::VectorXd weights = normalized_weights(pop.log_like, delta_beta);
    const double log_ck = log_mean_exp(pop.log_like, delta_beta);
    out.log_evidence += log_ck;
    beta = delta_beta == cap ? 1.0 : beta + delta_beta;

    const Eigen::MatrixXd cov = weighted_covariance(pop.samples, weights);
    const ProposalSpec prop = cfg.kernel == KernelKind::Mma
                                  ? make_diagonal_proposal(cov.diagonal(), ctrl.sigma)
                                  : make_full_proposal(cov, ctrl.sigma);

    pop = gather(pop, multinomial_resample(weights, cfg.n_chains, orch));
    pop.level = level;
    pop.beta = beta;

    const TemperedTarget target = exponent_target(prior, likelihood, beta);
    const EvolveResult ev =
        evolve_level(pop, target, prop, cfg, measure, static_cast<std::uint64_t>(level));
    ctrl = tune_scale(ctrl, ev.stats.controller_rate(cfg.kernel));

    LevelRecord row;
    row.level = level;
    row.beta = beta;
    row.delta_beta = delta_beta;
    row.weight_cov = cov_achieved;
    row.ess = effective_sample_size(weights);
    row.log_evidence_inc = log_ck;
    row.stage2_rate = ev.stats.stage2_rate;
    row.min_component_rate = ev.stats.min_component_rate;
    row.chain_len = ev.chain_len;
    row.corr_final = ev.corr_final;
    row.corr_cap_hit = ev.cap_hit;
    row.sigma = prop.scale;
    row.model_evals = counter_total(likelihood, nullptr) - evals_mark;
    row.wall_seconds = seconds_since(t_level);
    out.schedule.rows.push_back(row);
  }

  out.posterior = std::move(pop);
  return out;
}

SubsetResult run_subset(std::shared_ptr<const BlockPrior> prior,
                        std::shared_ptr<const FailureFn> failure,
                        std::shared_ptr<const LogLikelihood> likelihood, const EngineConfig& cfg,
                        std::optional<Population> seed_population, std::uint64_t phase_key) {
  if (!prior || !failure) throw std::invalid_argument("run_subset: prior and failure required");

  const auto t_init = Clock::now();
  std::uint64_t evals_mark = counter_total(likelihood, failure);
  Population pop = seed_population ? std::move(*seed_population)
                                   : sample_prior(*prior, cfg.seed, cfg.n_chains, cfg.workers);
  if (pop.size() != cfg.n_chains)
    throw std::invalid_argument("run_subset: seed population size != configured chain count");
  evaluate_missing_failures(pop, *failure, cfg.workers);

  SubsetResult out;
  LevelRecord init;
  init.level = 0;
  init.beta = -std::numeric_limits<double>::infinity();
  init.model_evals = counter_total(likelihood, failure) - evals_mark;
  init.wall_seconds = seconds_since(t_init);
  out.schedule.rows.push_back(init);

  const CorrMeasure measure = cfg.corr_measure.value_or(CorrMeasure::LogTarget);
  ControllerState ctrl{cfg.sigma0, cfg.alpha_target, cfg.gain};
  const auto n = cfg.n_chains;

  // Ancestral families: which initial sample each chain descends from.
  // Replication is deterministic, so this is exact bookkeeping.
  std::vector<int> families(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) families[static_cast<std::size_t>(i)] = static_cast<int>(i);
  Eigen::VectorXd family_luck = Eigen::VectorXd::Zero(n);

  double beta = -std::numeric_limits<double>::infinity();
  int level = 0;

  while (beta < 1.0) {
    if (level >= cfg.max_levels)
      throw ConvergenceAbort("run_subset: level budget exhausted at threshold " +
                             std::to_string(beta) + " (probability too small for budget)");
    ++level;
    const auto t_level = Clock::now();
    evals_mark = counter_total(likelihood, failure);

    const double beta_new = solve_failure_threshold(pop.failure, cfg.kappa);
    if (level > 1 && beta_new <= beta && beta_new < 1.0)
      throw ConvergenceAbort("run_subset: threshold stalled at " + std::to_string(beta_new));
    const bool final_level = beta_new >= 1.0;

    std::vector<char> indicator(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> survivors;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool in = pop.failure[i] >= beta_new;
      indicator[static_cast<std::size_t>(i)] = in ? 1 : 0;
      if (in) survivors.push_back(i);
    }
    const double level_fraction =
        static_cast<double>(survivors.size()) / static_cast<double>(n);
    accumulate_family_luck(families, indicator, level_fraction, family_luck);
    if (final_level) out.p_hat = std::pow(cfg.kappa, level - 1) * level_fraction;

    // Replicate the survivors cyclically to restore N chains; proposal
    // covariance comes from the surviving samples.
    const auto m = static_cast<Eigen::Index>(survivors.size());
    Eigen::MatrixXd surv(pop.dim(), m);
    for (Eigen::Index i = 0; i < m; ++i)
      surv.col(i) = pop.samples.col(survivors[static_cast<std::size_t>(i)]);
    const Eigen::MatrixXd cov =
        weighted_covariance(surv, Eigen::VectorXd::Ones(m));
    const ProposalSpec prop = cfg.kernel == KernelKind::Mma
                                  ? make_diagonal_proposal(cov.diagonal(), ctrl.sigma)
                                  : make_full_proposal(cov, ctrl.sigma);

    std::vector<Eigen::Index> seeds(static_cast<std::size_t>(n));
    std::vector<int> next_families(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index seed = survivors[static_cast<std::size_t>(i % m)];
      seeds[static_cast<std::size_t>(i)] = seed;
      next_families[static_cast<std::size_t>(i)] = families[static_cast<std::size_t>(seed)];
    }
    families = std::move(next_families);
    pop = gather(pop, seeds);
    pop.level = level;
    pop.beta = beta_new;

    const TemperedTarget target = indicator_target(prior, failure, beta_new, likelihood);
    const EvolveResult ev = evolve_level(pop, target, prop, cfg, measure,
                                         phase_key + static_cast<std::uint64_t>(level));
    ctrl = tune_scale(ctrl, ev.stats.controller_rate(cfg.kernel));

    LevelRecord row;
    row.level = level;
    row.beta = beta_new;
    row.level_prob = final_level ? level_fraction : cfg.kappa;
    row.rel_var_inc = family_luck.squaredNorm();  // running total up to this level
    row.ess = static_cast<double>(m);
    row.stage2_rate = ev.stats.stage2_rate;
    row.min_component_rate = ev.stats.min_component_rate;
    row.chain_len = ev.chain_len;
    row.corr_final = ev.corr_final;
    row.corr_cap_hit = ev.cap_hit;
    row.sigma = prop.scale;
    row.model_evals = counter_total(likelihood, failure) - evals_mark;
    row.wall_seconds = seconds_since(t_level);
    out.schedule.rows.push_back(row);

    beta = beta_new;
  }

  out.levels = level;
  out.sigma_hat = out.p_hat * std::sqrt(family_luck.squaredNorm());
  out.failure_population = std::move(pop);
  return out;
}

PosteriorReliabilityResult run_posterior_reliability(
    std::shared_ptr<const BlockPrior> prior, std::shared_ptr<const LogLikelihood> likelihood,
    std::shared_ptr<const FailureFn> failure, const EngineConfig& cfg) {
  PosteriorReliabilityResult out;
  out.updating = run_updating(prior, likelihood, cfg);
  // Distinct stream domain for the failure phase of the composed run.
  constexpr std::uint64_t kFailurePhase = 1ull << 40;
  out.subset =
      run_subset(prior, failure, likelihood, cfg, out.updating.posterior, kFailurePhase);
  return out;
}

double estimate_evidence(const LevelSchedule& schedule) {
  double total = 0.0;
  int used = 0;
  for (const auto& r : schedule.rows) {
    if (r.level == 0) continue;
    if (std::isnan(r.log_evidence_inc))
      throw std::invalid_argument("estimate_evidence: level " + std::to_string(r.level) +
                                  " has no evidence increment");
    total += r.log_evidence_inc;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("estimate_evidence: schedule has no level records");
  return total;
}

}  // namespace stmc
