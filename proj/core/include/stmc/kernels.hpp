#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "stmc/proposal.hpp"
#include "stmc/rng.hpp"
#include "stmc/target.hpp"

namespace stmc {

enum class KernelKind { Rwm, Mma, Romma };

KernelKind kernel_from_name(const std::string& name);
const char* kernel_name(KernelKind k);

// One Markov chain: current point plus cached evaluations and acceptance
// counters. Caches always match a fresh evaluation at theta; they are only
// rewritten on an accepted move.
struct ChainState {
  Eigen::VectorXd theta;
  double log_prior = 0.0;
  double log_like = 0.0;       // raw log-likelihood, 0 when the target has none
  double failure_value = 0.0;  // NaN when the target has no failure function

  std::uint64_t steps = 0;
  std::uint64_t stage2_accepts = 0;
  Eigen::ArrayXi stage1_accepts;  // per component / rank-one direction
  Eigen::ArrayXi through_accepts; // stage-1 accept AND same-step stage-2 accept

  void reset_counters() {
    steps = 0;
    stage2_accepts = 0;
    stage1_accepts.setZero();
    through_accepts.setZero();
  }
};

// Full evaluation at theta (used at chain start; inside steps the kernels
// reuse caches and short-circuit).
ChainState make_chain_state(const Eigen::VectorXd& theta, const TemperedTarget& target);

struct AcceptanceStats {
  double stage2_rate = 0.0;
  Eigen::ArrayXd per_component_through_rate;  // empty for RWM
  double min_component_rate = 0.0;

  // Rate the scale controller should track for a given kernel: stage-2
  // acceptance for RWM/MMA, minimum per-direction through rate for ROMMA.
  double controller_rate(KernelKind k) const {
    return k == KernelKind::Romma ? min_component_rate : stage2_rate;
  }
};

// Metropolis-Hastings with symmetric Gaussian random-walk proposal.
void rwm_step(ChainState& state, const TemperedTarget& target, const ProposalSpec& prop,
              RngStream& rng);

// Modified Metropolis: component-wise prior-ratio filter, then a single
// global likelihood (or failure-indicator) accept. Demands a diagonal
// proposal and an independent-component prior.
void mma_step(ChainState& state, const TemperedTarget& target, const ProposalSpec& prop,
              RngStream& rng);

// Rank-one Modified Metropolis: sequential rank-one updates along the columns
// of the proposal-covariance square root, filtered by the full prior, with a
// forward/reverse ordering coin flip, then one global likelihood accept.
void romma_step(ChainState& state, const TemperedTarget& target, const ProposalSpec& prop,
                RngStream& rng);

// Fixed-ordering variant. The coin flip between the two orderings is what
// makes the composite kernel reversible; each ordering alone still preserves
// targets whose likelihood part is constant, which the stationarity tests
// exercise directly.
void romma_step_ordered(ChainState& state, const TemperedTarget& target, const ProposalSpec& prop,
                        RngStream& rng, bool forward);

void kernel_step(KernelKind kind, ChainState& state, const TemperedTarget& target,
                 const ProposalSpec& prop, RngStream& rng);

}  // namespace stmc
