#include "stmc/weights.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stmc {

double weight_cov(const Eigen::VectorXd& loglike, double delta_beta) {
  const Eigen::Index n = loglike.size();
  if (n < 1) throw std::invalid_argument("weight_cov: empty population");
  const double shift = loglike.maxCoeff();
  Eigen::ArrayXd w = ((loglike.array() - shift) * delta_beta).exp();
  const double mean = w.mean();
  if (!(mean > 0.0)) return 0.0;
  const double var = (w - mean).square().mean();
  return std::sqrt(var) / mean;
}

double solve_delta_beta(const Eigen::VectorXd& loglike, double beta_prev, double kappa_star) {
  if (!(kappa_star > 0.0)) throw std::invalid_argument("solve_delta_beta: kappa_star must be > 0");
  if (beta_prev < 0.0 || beta_prev >= 1.0)
    throw std::invalid_argument("solve_delta_beta: beta_prev outside [0,1)");
  const double cap = 1.0 - beta_prev;

  // Degenerate population (all log-likelihoods equal): COV is identically 0.
  if ((loglike.array() == loglike[0]).all()) return cap;
  if (weight_cov(loglike, cap) <= kappa_star) return cap;

  double lo = 0.0, hi = cap;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = weight_cov(loglike, mid) - kappa_star;
    if (std::abs(g) < 1e-8) return mid;
    (g < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd normalized_weights(const Eigen::VectorXd& loglike, double delta_beta) {
  if (delta_beta < 0.0) throw std::invalid_argument("normalized_weights: negative delta_beta");
  Eigen::ArrayXd logw = loglike.array() * delta_beta;
  const double shift = logw.maxCoeff();
  Eigen::ArrayXd w = (logw - shift).exp();
  return (w / w.sum()).matrix();
}

double log_mean_exp(const Eigen::VectorXd& loglike, double delta_beta) {
  Eigen::ArrayXd logw = loglike.array() * delta_beta;
  const double shift = logw.maxCoeff();
  return shift + std::log((logw - shift).exp().mean());
}

double effective_sample_size(const Eigen::VectorXd& normalized) {
  const double s2 = normalized.squaredNorm();
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

std::vector<Eigen::Index> multinomial_resample(const Eigen::VectorXd& w, Eigen::Index n,
                                               RngStream& rng) {
  const Eigen::Index m = w.size();
  if (m < 1) throw std::invalid_argument("multinomial_resample: empty weights");
  Eigen::VectorXd cdf(m);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    acc += w[i];
    cdf[i] = acc;
  }
  std::vector<Eigen::Index> picks(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    const double* it = std::lower_bound(cdf.data(), cdf.data() + m, u);
    Eigen::Index j = static_cast<Eigen::Index>(it - cdf.data());
    if (j >= m) j = m - 1;
    picks[static_cast<std::size_t>(i)] = j;
  }
  return picks;
}

double solve_failure_threshold(const Eigen::VectorXd& failure_values, double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0))
    throw std::invalid_argument("solve_failure_threshold: kappa must lie in (0,1)");
  const Eigen::Index n = failure_values.size();
  if (n < 2) throw std::invalid_argument("solve_failure_threshold: population too small");

  std::vector<double> sorted(failure_values.data(), failure_values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back())
    throw std::invalid_argument("solve_failure_threshold: degenerate population (all values equal)");

  const auto rank = static_cast<std::size_t>(
      std::ceil((1.0 - kappa) * static_cast<double>(n)));  // 1-based ascending
  const double beta = sorted[std::min<std::size_t>(rank, static_cast<std::size_t>(n)) - 1];
  return std::min(beta, 1.0);
}

EssPrediction predict_ess(double kappa, double rho, double n, int levels) {
  if (kappa < 0.0) throw std::invalid_argument("predict_ess: negative kappa");
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("predict_ess: rho outside [0,1]");
  EssPrediction out;
  const double k2 = 1.0 + kappa * kappa;
  out.learning = rho * rho < 1.0 / k2;
  out.fixed_point = out.learning ? n * (1.0 - k2 * rho * rho) : 0.0;
  out.trajectory.reserve(static_cast<std::size_t>(levels) + 1);
  double cur = n;
  out.trajectory.push_back(cur);
  for (int k = 0; k < levels; ++k) {
    cur = cur * n / ((n - 1.0) * k2 * rho * rho + cur);
    out.trajectory.push_back(cur);
  }
  return out;
}

}  // namespace stmc
