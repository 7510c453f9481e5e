#pragma once

#include <Eigen/Dense>

namespace stmc {

// Gaussian proposal description: covariance Sigma, its symmetric square root
// S, a scalar scale sigma (candidate step = sigma * S * xi), and the diagonal
// standard deviations used by the component-wise MMA kernel.
struct ProposalSpec {
  Eigen::MatrixXd sigma;    // d x d, symmetric PSD
  Eigen::MatrixXd root;     // S with S * S^T ~= sigma
  Eigen::VectorXd diag_sd;  // sqrt(diag(sigma)), only meaningful when diagonal
  double scale = 1.0;       // sigma > 0; proposal covariance is scale^2 * Sigma
  bool diagonal = false;

  Eigen::Index dim() const { return sigma.rows(); }
};

// Symmetric PSD square root via eigendecomposition; negative eigenvalues are
// clamped to zero. Rejects visibly asymmetric input.
Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& sigma);

// Weighted sample covariance (weights normalized to sum 1) with a floor of
// 1e-10 * trace/d added to the diagonal so downstream roots never see an
// exactly singular matrix.
Eigen::MatrixXd weighted_covariance(const Eigen::MatrixXd& samples, const Eigen::VectorXd& weights);

ProposalSpec make_full_proposal(const Eigen::MatrixXd& sigma, double scale);
ProposalSpec make_diagonal_proposal(const Eigen::VectorXd& variances, double scale);

}  // namespace stmc
