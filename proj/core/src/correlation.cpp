#include "stmc/correlation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace stmc {

namespace {

Eigen::MatrixXd centered(const Eigen::MatrixXd& x) {
  return x.colwise() - x.rowwise().mean();
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd ca = a.array() - a.mean();
  const Eigen::ArrayXd cb = b.array() - b.mean();
  const double va = ca.square().sum();
  const double vb = cb.square().sum();
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return (ca * cb).sum() / std::sqrt(va * vb);
}

double componentwise_max_corr(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < x0.rows(); ++i)
    best = std::max(best, std::abs(pearson(x0.row(i), x1.row(i))));
  return best;
}

struct CcaDirections {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  bool ok = false;
};

// Leading canonical direction pair of (x0, x1), ridge-regularized.
CcaDirections fit_cca(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1) {
  const Eigen::Index d = x0.rows();
  const Eigen::Index n = x0.cols();
  CcaDirections out;
  if (n < 4) return out;
  const Eigen::MatrixXd c0 = centered(x0);
  const Eigen::MatrixXd c1 = centered(x1);
  const double scale = 1.0 / static_cast<double>(n - 1);
  Eigen::MatrixXd c00 = scale * (c0 * c0.transpose());
  Eigen::MatrixXd c11 = scale * (c1 * c1.transpose());
  const Eigen::MatrixXd c01 = scale * (c0 * c1.transpose());
  c00.diagonal().array() += 1e-8 * c00.trace() / static_cast<double>(d);
  c11.diagonal().array() += 1e-8 * c11.trace() / static_cast<double>(d);

  Eigen::LLT<Eigen::MatrixXd> l0(c00), l1(c11);
  if (l0.info() != Eigen::Success || l1.info() != Eigen::Success) return out;
  Eigen::MatrixXd m = l0.matrixL().solve(c01);
  m = l1.matrixL().solve(m.transpose()).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().size() == 0) return out;
  out.a = l0.matrixL().transpose().solve(svd.matrixU().col(0));
  out.b = l1.matrixL().transpose().solve(svd.matrixV().col(0));
  out.ok = true;
  return out;
}

}  // namespace

// The maximal canonical correlation overfits badly when d is a sizable
// fraction of N (independent populations evaluate to ~sqrt(d/N) or worse), so
// the directions are learned on one half of the chains and the correlation is
// measured on the other half. The component-wise maximum |corr| is a second,
// nearly unbiased lower bound on the same quantity; the estimate is the
// larger of the two.
CorrResult corr_cca(const Eigen::MatrixXd& start, const Eigen::MatrixXd& end) {
  if (start.rows() != end.rows() || start.cols() != end.cols())
    throw std::invalid_argument("corr_cca: population shapes differ");
  const Eigen::Index d = start.rows();
  const Eigen::Index n = start.cols();
  if (n <= d) throw std::invalid_argument("corr_cca: needs more samples than dimensions");

  const Eigen::Index half = n / 2;
  const Eigen::Index rest = n - half;
  Eigen::MatrixXd x0a(d, half), x1a(d, half), x0b(d, rest), x1b(d, rest);
  Eigen::Index ia = 0, ib = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j % 2 == 0 && ia < half) {
      x0a.col(ia) = start.col(j);
      x1a.col(ia) = end.col(j);
      ++ia;
    } else {
      x0b.col(ib) = start.col(j);
      x1b.col(ib) = end.col(j);
      ++ib;
    }
  }

  bool any_fit = false;
  double cca = 0.0;
  const auto evaluate_split = [&](const Eigen::MatrixXd& fit0, const Eigen::MatrixXd& fit1,
                                  const Eigen::MatrixXd& ev0, const Eigen::MatrixXd& ev1) {
    const CcaDirections dir = fit_cca(fit0, fit1);
    if (!dir.ok) return;
    any_fit = true;
    const Eigen::VectorXd z0 = ev0.transpose() * dir.a;
    const Eigen::VectorXd z1 = ev1.transpose() * dir.b;
    cca = std::max(cca, pearson(z0, z1));
  };
  evaluate_split(x0a, x1a, x0b, x1b);
  evaluate_split(x0b, x1b, x0a, x1a);

  const double comp = componentwise_max_corr(start, end);
  if (!any_fit) return {std::clamp(comp, 0.0, 1.0), true};
  return {std::clamp(std::max(cca, comp), 0.0, 1.0), false};
}

CorrResult corr_loglike(const Eigen::VectorXd& start, const Eigen::VectorXd& end) {
  if (start.size() != end.size())
    throw std::invalid_argument("corr_loglike: length mismatch");
  const Eigen::Index n = start.size();
  if (n < 2) throw std::invalid_argument("corr_loglike: need at least two chains");
  const Eigen::ArrayXd a = start.array() - start.mean();
  const Eigen::ArrayXd b = end.array() - end.mean();
  const double va = a.square().sum();
  const double vb = b.square().sum();
  if (va <= 0.0 || vb <= 0.0) return {0.0, true};
  return {(a * b).sum() / std::sqrt(va * vb), false};
}

}  // namespace stmc
