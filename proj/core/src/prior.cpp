#include "stmc/prior.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}  // namespace

double marginal_log_pdf(const Marginal& m, double x) {
  if (const auto* g = std::get_if<GaussianMarginal>(&m)) {
    const double z = (x - g->mean) / g->sd;
    return -0.5 * z * z - std::log(g->sd) - kHalfLog2Pi;
  }
  if (const auto* e = std::get_if<ExponentialMarginal>(&m)) {
    if (x < 0.0) return kNegInf;
    return -std::log(e->mean) - x / e->mean;
  }
  const auto& u = std::get<UniformMarginal>(m);
  if (x < u.lo || x > u.hi) return kNegInf;
  return -std::log(u.hi - u.lo);
}

double marginal_sample(const Marginal& m, RngStream& rng) {
  if (const auto* g = std::get_if<GaussianMarginal>(&m)) return g->mean + g->sd * rng.normal();
  if (const auto* e = std::get_if<ExponentialMarginal>(&m)) return rng.exponential(e->mean);
  const auto& u = std::get<UniformMarginal>(m);
  return u.lo + (u.hi - u.lo) * rng.uniform();
}

BlockPrior::BlockPrior(std::shared_ptr<const BlockLayout> layout, std::vector<Marginal> marginals)
    : layout_(std::move(layout)), marginals_(std::move(marginals)) {
  if (!layout_) throw std::invalid_argument("BlockPrior: null layout");
  if (layout_->dim() != marginals_.size())
    throw std::invalid_argument("BlockPrior: layout dimension != marginal count");
  packed_.reserve(marginals_.size());
  for (const auto& m : marginals_) {
    Packed p{};
    if (const auto* g = std::get_if<GaussianMarginal>(&m)) {
      if (!(g->sd > 0.0)) throw std::invalid_argument("BlockPrior: Gaussian sd must be positive");
      p.kind = Kind::Gaussian;
      p.a = g->mean;
      p.b = 1.0 / g->sd;
      p.log_norm = -std::log(g->sd) - kHalfLog2Pi;
    } else if (const auto* e = std::get_if<ExponentialMarginal>(&m)) {
      if (!(e->mean > 0.0)) throw std::invalid_argument("BlockPrior: Exponential mean must be positive");
      p.kind = Kind::Exponential;
      p.a = 1.0 / e->mean;
      p.log_norm = -std::log(e->mean);
    } else {
      const auto& u = std::get<UniformMarginal>(m);
      if (!(u.hi > u.lo)) throw std::invalid_argument("BlockPrior: Uniform needs hi > lo");
      p.kind = Kind::Uniform;
      p.a = u.lo;
      p.b = u.hi;
      p.log_norm = -std::log(u.hi - u.lo);
    }
    packed_.push_back(p);
  }
}

double BlockPrior::log_pdf(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != packed_.size())
    throw std::invalid_argument("BlockPrior::log_pdf: dimension mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < packed_.size(); ++i) {
    lp += component_log_pdf(i, theta[static_cast<Eigen::Index>(i)]);
    if (lp == kNegInf) return kNegInf;
  }
  return lp;
}

Eigen::VectorXd BlockPrior::sample(RngStream& rng) const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(marginals_.size()));
  for (std::size_t i = 0; i < marginals_.size(); ++i)
    theta[static_cast<Eigen::Index>(i)] = marginal_sample(marginals_[i], rng);
  return theta;
}

void append_block(std::vector<Marginal>& dst, std::size_t n, const Marginal& m) {
  for (std::size_t i = 0; i < n; ++i) dst.push_back(m);
}

}  // namespace stmc
