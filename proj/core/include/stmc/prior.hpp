#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "stmc/block_layout.hpp"
#include "stmc/rng.hpp"

namespace stmc {

struct GaussianMarginal {
  double mean;
  double sd;
};

struct ExponentialMarginal {
  double mean;  // rate = 1/mean, support [0, inf)
};

struct UniformMarginal {
  double lo;
  double hi;
};

using Marginal = std::variant<GaussianMarginal, ExponentialMarginal, UniformMarginal>;

double marginal_log_pdf(const Marginal& m, double x);
double marginal_sample(const Marginal& m, RngStream& rng);

// Product prior with independent 1-D marginals. Independence is load-bearing:
// the component-wise stage of MMA requires it, and the tempering weight
// algebra assumes the prior needs no per-level reweighting.
class BlockPrior {
 public:
  BlockPrior(std::shared_ptr<const BlockLayout> layout, std::vector<Marginal> marginals);

  std::size_t dim() const { return marginals_.size(); }
  const BlockLayout& layout() const { return *layout_; }
  std::shared_ptr<const BlockLayout> layout_ptr() const { return layout_; }
  const Marginal& marginal(std::size_t i) const { return marginals_[i]; }

  double log_pdf(const Eigen::VectorXd& theta) const;

  double component_log_pdf(std::size_t i, double x) const {
    const Packed& p = packed_[i];
    switch (p.kind) {
      case Kind::Gaussian: {
        const double z = (x - p.a) * p.b;
        return -0.5 * z * z + p.log_norm;
      }
      case Kind::Exponential:
        if (x < 0.0) return -std::numeric_limits<double>::infinity();
        return -x * p.a + p.log_norm;
      default:
        if (x < p.a || x > p.b) return -std::numeric_limits<double>::infinity();
        return p.log_norm;
    }
  }

  Eigen::VectorXd sample(RngStream& rng) const;

 private:
  // Flattened marginal parameters with precomputed normalizers; the density
  // is evaluated once per component per rank-one update, so this path is hot.
  enum class Kind : unsigned char { Gaussian, Exponential, Uniform };
  struct Packed {
    Kind kind;
    double a;  // mean | rate | lo
    double b;  // 1/sd | unused | hi
    double log_norm;
  };

  std::shared_ptr<const BlockLayout> layout_;
  std::vector<Marginal> marginals_;
  std::vector<Packed> packed_;
};

// Convenience builder: same marginal repeated across one block.
void append_block(std::vector<Marginal>& dst, std::size_t n, const Marginal& m);

}  // namespace stmc
