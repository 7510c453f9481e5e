#include "stmc/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool metropolis_accept(double log_ratio, RngStream& rng) {
  if (log_ratio >= 0.0) {
    rng.uniform();  // keep the draw count per step fixed
    return true;
  }
  return rng.uniform() < std::exp(log_ratio);
}

// Candidate evaluation for the global (stage-2) accept. Evaluates only what
// the target needs, cheapest first, and reports how the pieces combine.
struct Stage2Eval {
  double log_like = 0.0;
  double failure_value = std::numeric_limits<double>::quiet_NaN();
  bool in_domain = true;
  double log_ratio = kNegInf;  // likelihood-part ratio vs current state
};

Stage2Eval stage2_evaluate(const TemperedTarget& target, const Eigen::VectorXd& candidate,
                           const ChainState& state) {
  Stage2Eval ev;
  if (target.kind == TargetKind::FailureIndicator) {
    ev.failure_value = (*target.failure)(candidate);
    ev.in_domain = ev.failure_value >= target.beta;
    if (!ev.in_domain) return ev;  // indicator zero, likelihood eval not needed
    if (target.likelihood) {
      ev.log_like = (*target.likelihood)(candidate);
      ev.log_ratio = ev.log_like - state.log_like;
    } else {
      ev.log_ratio = 0.0;
    }
    return ev;
  }
  if (target.beta > 0.0) {
    if (!target.likelihood)
      throw std::invalid_argument("kernel step: tempered target with beta > 0 lacks a likelihood");
    ev.log_like = (*target.likelihood)(candidate);
    ev.log_ratio = target.beta * (ev.log_like - state.log_like);
  } else {
    ev.log_ratio = 0.0;
  }
  return ev;
}

void commit(ChainState& state, Eigen::VectorXd&& theta, double log_prior, const Stage2Eval& ev,
            const TemperedTarget& target) {
  state.theta = std::move(theta);
  state.log_prior = log_prior;
  if (target.kind == TargetKind::FailureIndicator) {
    state.failure_value = ev.failure_value;
    if (target.likelihood) state.log_like = ev.log_like;
  } else if (target.beta > 0.0) {
    state.log_like = ev.log_like;
  }
}

}  // namespace

KernelKind kernel_from_name(const std::string& name) {
  if (name == "rwm") return KernelKind::Rwm;
  if (name == "mma") return KernelKind::Mma;
  if (name == "romma") return KernelKind::Romma;
  throw std::invalid_argument("unknown kernel: " + name);
}

const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::Rwm: return "rwm";
    case KernelKind::Mma: return "mma";
    default: return "romma";
  }
}

ChainState make_chain_state(const Eigen::VectorXd& theta, const TemperedTarget& target) {
  ChainState s;
  s.theta = theta;
  s.log_prior = target.prior->log_pdf(theta);
  if (target.likelihood) s.log_like = (*target.likelihood)(theta);
  if (target.failure)
    s.failure_value = (*target.failure)(theta);
  else
    s.failure_value = std::numeric_limits<double>::quiet_NaN();
  s.stage1_accepts = Eigen::ArrayXi::Zero(theta.size());
  s.through_accepts = Eigen::ArrayXi::Zero(theta.size());
  return s;
}

void rwm_step(ChainState& state, const TemperedTarget& target, const ProposalSpec& prop,
              RngStream& rng) {
  ++state.steps;
  const Eigen::Index d = state.theta.size();
  Eigen::VectorXd xi(d);
  for (Eigen::Index i = 0; i < d; ++i) xi[i] = rng.normal();

  Eigen::VectorXd candidate = state.theta;
  if (prop.diagonal)
    candidate += prop.scale * prop.diag_sd.cwiseProduct(xi);
  else
    candidate.noalias() += prop.scale * (prop.root * xi);

  // One model evaluation per step, also for candidates the prior alone would
  // reject: RWM has no prior-filtering stage, and the kernel comparisons
  // charge it accordingly.
  const double cand_log_prior = target.prior->log_pdf(candidate);
  const Stage2Eval ev = stage2_evaluate(target, candidate, state);
  const double log_ratio = (cand_log_prior - state.log_prior) + ev.log_ratio;
  if (metropolis_accept(log_ratio, rng)) {
    commit(state, std::move(candidate), cand_log_prior, ev, target);
    ++state.stage2_accepts;
  }
}

void mma_step(ChainState& state, const TemperedTarget& target, const ProposalSpec& prop,
              RngStream& rng) {
  if (!prop.diagonal)
    throw std::invalid_argument("mma_step: MMA requires a diagonal proposal");
  ++state.steps;
  const Eigen::Index d = state.theta.size();
  const BlockPrior& prior = *target.prior;

  // Stage 1: independent per-component prior-ratio filter. The whole xi
  // vector is drawn up front and a rejected component's entry is zeroed.
  Eigen::VectorXd xi(d);
  for (Eigen::Index j = 0; j < d; ++j) xi[j] = rng.normal();

  Eigen::VectorXd candidate = state.theta;
  Eigen::ArrayXi moved = Eigen::ArrayXi::Zero(d);
  bool any_moved = false;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double trial = state.theta[j] + prop.scale * prop.diag_sd[j] * xi[j];
    const double lp_trial = prior.component_log_pdf(static_cast<std::size_t>(j), trial);
    const double lp_cur = prior.component_log_pdf(static_cast<std::size_t>(j), state.theta[j]);
    const double log_ratio = (lp_trial == kNegInf) ? kNegInf : lp_trial - lp_cur;
    if (metropolis_accept(log_ratio, rng)) {
      candidate[j] = trial;
      moved[j] = 1;
      any_moved = true;
    }
  }

  // Stage 2: one global accept on the likelihood part only.
  if (!any_moved) {
    // Identity candidate: ratio is 1, the chain repeats and it counts as a
    // stage-2 accept. No model evaluation is spent.
    rng.uniform();
    ++state.stage2_accepts;
    return;
  }

  const Stage2Eval ev = stage2_evaluate(target, candidate, state);
  if (!ev.in_domain) {
    rng.uniform();
    return;
  }
  if (metropolis_accept(ev.log_ratio, rng)) {
    double cand_log_prior = state.log_prior;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!moved[j]) continue;
      cand_log_prior += prior.component_log_pdf(static_cast<std::size_t>(j), candidate[j]) -
                        prior.component_log_pdf(static_cast<std::size_t>(j), state.theta[j]);
    }
    commit(state, std::move(candidate), cand_log_prior, ev, target);
    ++state.stage2_accepts;
    state.stage1_accepts += moved;
    state.through_accepts += moved;
  } else {
    state.stage1_accepts += moved;
  }
}

void romma_step(ChainState& state, const TemperedTarget& target, const ProposalSpec& prop,
                RngStream& rng) {
  const bool forward = rng.uniform() < 0.5;
  romma_step_ordered(state, target, prop, rng, forward);
}

void romma_step_ordered(ChainState& state, const TemperedTarget& target, const ProposalSpec& prop,
                        RngStream& rng, bool forward) {
  ++state.steps;
  const Eigen::Index d = state.theta.size();
  const BlockPrior& prior = *target.prior;

  Eigen::VectorXd xi(d);
  for (Eigen::Index i = 0; i < d; ++i) xi[i] = rng.normal();

  // Stage 1: sweep the columns of the scaled root in the chosen ordering.
  // Each rank-one update moves the whole vector, so the filter uses the full
  // prior density; a running value avoids recomputing the current one.
  Eigen::VectorXd hat = state.theta;
  Eigen::VectorXd trial(d);
  double lp_hat = state.log_prior;
  Eigen::ArrayXi moved = Eigen::ArrayXi::Zero(d);
  bool any_moved = false;
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::Index col = forward ? j : d - 1 - j;
    trial = hat;
    trial.noalias() += (prop.scale * xi[j]) * prop.root.col(col);
    const double lp_trial = prior.log_pdf(trial);
    const double log_ratio = (lp_trial == kNegInf) ? kNegInf : lp_trial - lp_hat;
    if (metropolis_accept(log_ratio, rng)) {
      hat.swap(trial);
      lp_hat = lp_trial;
      moved[col] = 1;
      any_moved = true;
    }
  }

  if (!any_moved) {
    rng.uniform();
    ++state.stage2_accepts;
    return;
  }

  const Stage2Eval ev = stage2_evaluate(target, hat, state);
  if (!ev.in_domain) {
    rng.uniform();
    return;
  }
  if (metropolis_accept(ev.log_ratio, rng)) {
    commit(state, std::move(hat), lp_hat, ev, target);
    ++state.stage2_accepts;
    state.stage1_accepts += moved;
    state.through_accepts += moved;
  } else {
    state.stage1_accepts += moved;
  }
}

void kernel_step(KernelKind kind, ChainState& state, const TemperedTarget& target,
                 const ProposalSpec& prop, RngStream& rng) {
  switch (kind) {
    case KernelKind::Rwm: rwm_step(state, target, prop, rng); break;
    case KernelKind::Mma: mma_step(state, target, prop, rng); break;
    case KernelKind::Romma: romma_step(state, target, prop, rng); break;
  }
}

}  // namespace stmc
