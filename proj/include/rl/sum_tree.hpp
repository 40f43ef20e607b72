#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rl {

// Complete binary tree of partial sums over leaf priorities. set() repairs
// the path to the root by recomputing each parent from its children, so the
// structural invariant (parent equals sum of children) holds exactly.
class SumTree {
 public:
  explicit SumTree(int capacity) : cap_(capacity) {
    if (capacity < 1) throw std::invalid_argument("SumTree: capacity must be positive");
    base_ = 1;
    while (base_ < capacity) base_ <<= 1;
    t_.assign(static_cast<size_t>(base_) * 2, 0.0);
  }

  int capacity() const { return cap_; }

  double total() const { return t_[1]; }

  double get(int leaf) const { return t_[static_cast<size_t>(base_) + leaf]; }

  void set(int leaf, double value) {
    if (leaf < 0 || leaf >= cap_) throw std::out_of_range("SumTree::set: bad leaf");
    size_t i = static_cast<size_t>(base_) + leaf;
    t_[i] = value;
    for (i >>= 1; i >= 1; i >>= 1) t_[i] = t_[2 * i] + t_[2 * i + 1];
  }

  // Finds the leaf whose prefix-sum interval contains mass in [0, total()).
  int sample(double mass) const {
    size_t i = 1;
    while (i < static_cast<size_t>(base_)) {
      double left = t_[2 * i];
      if (mass < left) {
        i = 2 * i;
      } else {
        mass -= left;
        i = 2 * i + 1;
      }
    }
    int leaf = static_cast<int>(i - base_);
    // Rounding at the very top of the range can land past the last live leaf.
    if (leaf >= cap_) leaf = cap_ - 1;
    while (leaf > 0 && get(leaf) <= 0.0) --leaf;
    return leaf;
  }

  // Full-tree audit of the structural invariant.
  bool audit(double tol = 1e-9) const {
    for (size_t i = 1; i < static_cast<size_t>(base_); ++i)
      if (std::abs(t_[i] - (t_[2 * i] + t_[2 * i + 1])) > tol) return false;
    return true;
  }

 private:
  int cap_ = 0;
  int base_ = 1;
  std::vector<double> t_;
};

}  // namespace rl
