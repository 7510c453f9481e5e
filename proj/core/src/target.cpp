#include "stmc/target.hpp"

#include <stdexcept>

namespace stmc {

TemperedTarget exponent_target(std::shared_ptr<const BlockPrior> prior,
                               std::shared_ptr<const LogLikelihood> likelihood, double beta) {
  if (!prior) throw std::invalid_argument("exponent_target: null prior");
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("exponent_target: beta outside [0,1]");
  if (beta > 0.0 && !likelihood)
    throw std::invalid_argument("exponent_target: beta > 0 requires a likelihood");
  TemperedTarget t;
  t.kind = TargetKind::Exponent;
  t.beta = beta;
  t.prior = std::move(prior);
  t.likelihood = std::move(likelihood);
  return t;
}

TemperedTarget indicator_target(std::shared_ptr<const BlockPrior> prior,
                                std::shared_ptr<const FailureFn> failure, double beta_f,
                                std::shared_ptr<const LogLikelihood> likelihood) {
  if (!prior) throw std::invalid_argument("indicator_target: null prior");
  if (!failure) throw std::invalid_argument("indicator_target: null failure function");
  if (beta_f > 1.0) throw std::invalid_argument("indicator_target: threshold beyond 1");
  TemperedTarget t;
  t.kind = TargetKind::FailureIndicator;
  t.beta = beta_f;
  t.prior = std::move(prior);
  t.failure = std::move(failure);
  t.likelihood = std::move(likelihood);
  return t;
}

TargetEval log_target(const TemperedTarget& target, const Eigen::VectorXd& theta) {
  if (!target.prior) throw std::invalid_argument("log_target: target has no prior");
  TargetEval ev;
  ev.log_prior = target.prior->log_pdf(theta);

  if (target.kind == TargetKind::Exponent) {
    if (target.beta > 0.0) {
      if (!target.likelihood)
        throw std::invalid_argument("log_target: Exponent target with beta > 0 lacks a likelihood");
      ev.log_like_part = target.beta * (*target.likelihood)(theta);
    }
    return ev;
  }

  ev.in_domain = (*target.failure)(theta) >= target.beta;
  if (target.likelihood) ev.log_like_part = (*target.likelihood)(theta);
  return ev;
}

}  // namespace stmc
