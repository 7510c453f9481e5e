#include "stmc/proposal.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace stmc {

Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) throw std::invalid_argument("matrix_sqrt: not square");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) throw std::invalid_argument("matrix_sqrt: matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sigma + sigma.transpose()));
  if (es.info() != Eigen::Success) throw std::runtime_error("matrix_sqrt: eigendecomposition failed");
  Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lambda.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd weighted_covariance(const Eigen::MatrixXd& samples, const Eigen::VectorXd& weights) {
  const Eigen::Index d = samples.rows();
  const Eigen::Index n = samples.cols();
  if (weights.size() != n) throw std::invalid_argument("weighted_covariance: weight count mismatch");
  if ((weights.array() < 0.0).any())
    throw std::invalid_argument("weighted_covariance: negative weight");
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("weighted_covariance: all weights zero");

  const Eigen::VectorXd w = weights / total;
  const Eigen::VectorXd mean = samples * w;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd c = samples.col(i) - mean;
    cov.noalias() += w[i] * (c * c.transpose());
  }
  const double jitter = 1e-10 * cov.trace() / static_cast<double>(d);
  cov.diagonal().array() += jitter;
  return cov;
}

ProposalSpec make_full_proposal(const Eigen::MatrixXd& sigma, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("make_full_proposal: scale must be positive");
  ProposalSpec p;
  p.sigma = sigma;
  p.root = matrix_sqrt(sigma);
  p.diag_sd = sigma.diagonal().cwiseMax(0.0).cwiseSqrt();
  p.scale = scale;
  p.diagonal = false;
  return p;
}

ProposalSpec make_diagonal_proposal(const Eigen::VectorXd& variances, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("make_diagonal_proposal: scale must be positive");
  if ((variances.array() < 0.0).any())
    throw std::invalid_argument("make_diagonal_proposal: negative variance");
  ProposalSpec p;
  p.sigma = variances.asDiagonal();
  p.diag_sd = variances.cwiseSqrt();
  p.root = p.diag_sd.asDiagonal();
  p.scale = scale;
  p.diagonal = true;
  return p;
}

}  // namespace stmc
