#pragma once

#include <deque>
#include <stdexcept>
#include <vector>

#include "rl/env.hpp"

namespace rl {

// N-step roll-out record: start state and action, the discounted sum of the
// next n_used rewards, and the state reached after n_used steps. n_used is
// shorter than N only when the episode ended inside the window, in which
// case done is set and the bootstrap term vanishes. The bootstrap discount
// is gamma^n_used, never gamma^N.
struct NStepRecord {
  std::vector<double> state;
  int action = 0;
  double reward_sum = 0.0;
  int n_used = 0;
  std::vector<double> final_state;
  bool done = false;
};

// Turns an in-order transition stream into N-step records, one per visited
// state. Records straddling an episode end are drained with shrinking
// windows when the done transition arrives. N = 1 reproduces the raw
// transitions.
class NStepAssembler {
 public:
  NStepAssembler(int n, double gamma) : n_(n), gamma_(gamma) {
    if (n < 1) throw std::invalid_argument("NStepAssembler: N must be >= 1");
  }

  std::vector<NStepRecord> push(const Transition& t) {
    window_.push_back(t);
    std::vector<NStepRecord> out;
    if (t.done) {
      while (!window_.empty()) {
        out.push_back(make_record(static_cast<int>(window_.size())));
        window_.pop_front();
      }
    } else if (static_cast<int>(window_.size()) == n_) {
      out.push_back(make_record(n_));
      window_.pop_front();
    }
    return out;
  }

  int pending() const { return static_cast<int>(window_.size()); }
  void clear() { window_.clear(); }

 private:
  NStepRecord make_record(int len) const {
    NStepRecord r;
    r.state = window_.front().state;
    r.action = window_.front().action;
    double w = 1.0;
    for (int k = 0; k < len; ++k) {
      r.reward_sum += w * window_[k].reward;
      w *= gamma_;
    }
    r.n_used = len;
    r.final_state = window_[len - 1].next_state;
    r.done = window_[len - 1].done;
    return r;
  }

  int n_;
  double gamma_;
  std::deque<Transition> window_;
};

}  // namespace rl
