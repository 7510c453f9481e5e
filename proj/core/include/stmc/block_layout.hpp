#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stmc {

// Named contiguous index ranges that partition a parameter vector,
// e.g. demand[31] | leak_size[34] | leak_pos[34].
class BlockLayout {
 public:
  struct Block {
    std::string name;
    std::size_t offset;
    std::size_t length;
  };

  BlockLayout() = default;

  void add_block(const std::string& name, std::size_t length) {
    if (length == 0) throw std::invalid_argument("BlockLayout: empty block " + name);
    for (const auto& b : blocks_)
      if (b.name == name) throw std::invalid_argument("BlockLayout: duplicate block " + name);
    blocks_.push_back({name, dim_, length});
    dim_ += length;
  }

  std::size_t dim() const { return dim_; }

  const Block& block(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    throw std::out_of_range("BlockLayout: no block named " + name);
  }

  bool has_block(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return true;
    return false;
  }

  Eigen::VectorXd view(const Eigen::VectorXd& theta, const std::string& name) const {
    const auto& b = block(name);
    if (static_cast<std::size_t>(theta.size()) != dim_)
      throw std::invalid_argument("BlockLayout: vector/layout dimension mismatch");
    return theta.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.length));
  }

  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  std::vector<Block> blocks_;
  std::size_t dim_ = 0;
};

}  // namespace stmc
