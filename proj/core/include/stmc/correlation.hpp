#pragma once

#include <Eigen/Dense>

namespace stmc {

struct CorrResult {
  double value = 0.0;
  bool fallback = false;  // degenerate input, secondary definition used
};

// Maximal canonical correlation between chain starts and chain ends
// (columns are samples). Auto-covariances get a ridge of 1e-8 * trace/d; if
// they are still rank deficient the component-wise max |corr| is returned
// with the fallback flag set. Requires more samples than dimensions.
CorrResult corr_cca(const Eigen::MatrixXd& start, const Eigen::MatrixXd& end);

// Pearson correlation of the paired scalar summaries (typically cached
// log-target values) at chain starts and ends. Zero variance either side
// returns 0 flagged.
CorrResult corr_loglike(const Eigen::VectorXd& start, const Eigen::VectorXd& end);

}  // namespace stmc
