#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>

#include "stmc/prior.hpp"

namespace stmc {

// Shared forward-model budget counter. Every call into the underlying model
// (a hydraulic solve, a likelihood evaluation of a toy problem, ...) bumps it
// exactly once, so manifests can account for the full compute budget.
using EvalCounter = std::shared_ptr<std::atomic<std::uint64_t>>;

inline EvalCounter make_eval_counter() {
  return std::make_shared<std::atomic<std::uint64_t>>(0);
}

// Log-likelihood of the data as a function of the parameter vector.
// Returns -inf only for structurally invalid inputs (e.g. solver divergence).
struct LogLikelihood {
  std::function<double(const Eigen::VectorXd&)> fn;
  EvalCounter evals = make_eval_counter();  // forward-model solves, not calls

  double operator()(const Eigen::VectorXd& theta) const { return fn(theta); }
  std::uint64_t eval_count() const { return evals->load(); }
};

// Performance failure function f: failure is f(theta) >= 1.
struct FailureFn {
  std::function<double(const Eigen::VectorXd&)> fn;
  EvalCounter evals = make_eval_counter();

  double operator()(const Eigen::VectorXd& theta) const { return fn(theta); }
  std::uint64_t eval_count() const { return evals->load(); }
};

enum class TargetKind {
  Exponent,          // pi(theta) = L(theta)^beta p(theta), beta in [0,1]
  FailureIndicator,  // pi(theta) = 1{f(theta) >= beta} p(theta) [* L(theta)]
};

// One intermediate distribution of a tempered run. The likelihood is raw
// (untempered); kernels and the engine apply `beta` themselves, so cached
// log-likelihoods survive level changes.
struct TemperedTarget {
  TargetKind kind = TargetKind::Exponent;
  double beta = 0.0;  // exponent, or failure threshold (-inf allowed)
  std::shared_ptr<const BlockPrior> prior;
  std::shared_ptr<const LogLikelihood> likelihood;  // optional
  std::shared_ptr<const FailureFn> failure;         // FailureIndicator only

  bool uses_likelihood() const {
    return likelihood && (kind == TargetKind::FailureIndicator || beta > 0.0);
  }
};

TemperedTarget exponent_target(std::shared_ptr<const BlockPrior> prior,
                               std::shared_ptr<const LogLikelihood> likelihood, double beta);
TemperedTarget indicator_target(std::shared_ptr<const BlockPrior> prior,
                                std::shared_ptr<const FailureFn> failure, double beta_f,
                                std::shared_ptr<const LogLikelihood> likelihood = nullptr);

// Components of the log target, kept separate so two-stage kernels can
// accept on the prior part and the likelihood part independently.
struct TargetEval {
  double log_prior = 0.0;
  double log_like_part = 0.0;  // beta * loglike (Exponent) or raw loglike (indicator)
  bool in_domain = true;       // f(theta) >= beta for indicator targets

  double total() const {
    if (!in_domain) return -std::numeric_limits<double>::infinity();
    return log_prior + log_like_part;
  }
};

TargetEval log_target(const TemperedTarget& target, const Eigen::VectorXd& theta);

}  // namespace stmc
