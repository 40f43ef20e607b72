#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rl/nstep.hpp"
#include "rl/rng.hpp"
#include "rl/sum_tree.hpp"

namespace rl {

struct PrioritySample {
  int slot = 0;
  double prob = 0.0;    // P(T) under the current priority mass
  double weight = 0.0;  // (1/(M*P))^beta, normalized by the batch maximum
};

// Ring buffer of N-step records with strictly FIFO eviction. In prioritized
// mode a SumTree holds rho(T)^alpha per slot; priorities rho are clipped to
// at most 1 and floored at 1e-6 so no stored record becomes permanently
// unsampleable.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, bool prioritized = false, double alpha = 0.5)
      : capacity_(capacity), prioritized_(prioritized), alpha_(alpha), tree_(capacity) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    ring_.resize(capacity);
  }

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  bool prioritized() const { return prioritized_; }
  double max_rho() const { return max_rho_; }
  const SumTree& tree() const { return tree_; }
  const NStepRecord& at(int slot) const { return ring_[slot]; }

  // New records enter with the highest priority seen so far (clipped to 1),
  // so they are sampled at least once before their real loss is known.
  int push(const NStepRecord& rec, std::optional<double> rho = std::nullopt) {
    int slot = cursor_;
    ring_[slot] = rec;
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
    if (prioritized_) tree_.set(slot, std::pow(clip_rho(rho.value_or(max_rho_)), alpha_));
    return slot;
  }

  // Sampling is i.i.d. with replacement, so any nonempty buffer serves any
  // batch size; agents gate training on their own warm-up threshold.
  std::vector<int> sample_uniform(int batch, Rng& rng) const {
    require_nonempty();
    std::vector<int> out(batch);
    for (int i = 0; i < batch; ++i) out[i] = rng.uniform_int(size_);
    return out;
  }

  // Stratified proportional sampling: the total priority mass is split into
  // `batch` equal segments with one draw per segment. Importance weights are
  // (1/(M*P))^beta with M the number of stored records, then divided by the
  // batch maximum so the largest weight is 1.
  std::vector<PrioritySample> sample_prioritized(int batch, double beta, Rng& rng) const {
    if (!prioritized_) throw std::logic_error("ReplayBuffer: not in prioritized mode");
    require_nonempty();
    std::vector<PrioritySample> out(batch);
    const double total = tree_.total();
    const double seg = total / batch;
    double wmax = 0.0;
    for (int i = 0; i < batch; ++i) {
      double mass = seg * (i + rng.uniform());
      int slot = tree_.sample(std::min(mass, total * (1.0 - 1e-15)));
      double p = tree_.get(slot) / total;
      double w = std::pow(1.0 / (static_cast<double>(size_) * p), beta);
      out[i] = {slot, p, w};
      wmax = std::max(wmax, w);
    }
    for (auto& s : out) s.weight /= wmax;
    return out;
  }

  void update_priorities(std::span<const int> slots, std::span<const double> rhos) {
    if (!prioritized_) throw std::logic_error("ReplayBuffer: not in prioritized mode");
    if (slots.size() != rhos.size())
      throw std::invalid_argument("ReplayBuffer: slots/priorities size mismatch");
    for (size_t i = 0; i < slots.size(); ++i) {
      if (slots[i] < 0 || slots[i] >= size_) throw std::out_of_range("ReplayBuffer: bad slot");
      double rho = clip_rho(rhos[i]);
      max_rho_ = std::max(max_rho_, rho);
      tree_.set(slots[i], std::pow(rho, alpha_));
    }
  }

  double mean_priority() const {
    if (!prioritized_ || size_ == 0) return 0.0;
    double s = 0.0;
    for (int i = 0; i < size_; ++i) s += tree_.get(i);
    return s / size_;
  }

 private:
  static constexpr double kPriorityFloor = 1e-6;

  double clip_rho(double rho) const { return std::min(1.0, std::max(kPriorityFloor, rho)); }

  void require_nonempty() const {
    if (size_ == 0) throw std::logic_error("ReplayBuffer: cannot sample an empty buffer");
  }

  int capacity_;
  bool prioritized_;
  double alpha_;
  std::vector<NStepRecord> ring_;
  SumTree tree_;
  int cursor_ = 0;
  int size_ = 0;
  double max_rho_ = 1.0;  // new records default to the cap
};

// Linear importance-sampling anneal: beta rises from beta0 to 1 over
// beta_steps environment steps.
inline double beta_schedule(double beta0, long beta_steps, long t) {
  if (beta_steps <= 0) return 1.0;
  double f = static_cast<double>(t) / static_cast<double>(beta_steps);
  return std::min(1.0, beta0 + (1.0 - beta0) * f);
}

}  // namespace rl
