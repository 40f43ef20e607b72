#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rl/env.hpp"

namespace rl {

// Fully enumerable MDP with explicit transition probabilities. Serves the
// exact dynamic-programming lab and doubles as the backing table for small
// sampled environments. Rewards are a function of the entered state, r(s').
struct TabularMdp {
  std::string name;
  int num_states = 0;
  int num_actions = 0;
  int start_state = 0;
  double gamma = 0.9;
  double best_return = 0.0;  // highest achievable undiscounted episode return
  std::vector<double> p;        // [s][a][s'] row-stochastic
  std::vector<double> reward;   // r(s') per state
  std::vector<uint8_t> terminal;

  double prob(int s, int a, int s2) const {
    return p[(static_cast<size_t>(s) * num_actions + a) * num_states + s2];
  }
  double& prob_ref(int s, int a, int s2) {
    return p[(static_cast<size_t>(s) * num_actions + a) * num_states + s2];
  }

  void init(int states, int actions) {
    num_states = states;
    num_actions = actions;
    p.assign(static_cast<size_t>(states) * actions * states, 0.0);
    reward.assign(states, 0.0);
    terminal.assign(states, 0);
  }

  void validate() const {
    for (int s = 0; s < num_states; ++s) {
      if (terminal[s]) continue;
      for (int a = 0; a < num_actions; ++a) {
        double z = 0.0;
        for (int s2 = 0; s2 < num_states; ++s2) z += prob(s, a, s2);
        if (std::abs(z - 1.0) > 1e-12)
          throw std::logic_error(name + ": transition row (" + std::to_string(s) + "," +
                                 std::to_string(a) + ") not stochastic");
      }
    }
  }
};

// chain(n): n states in a line plus an absorbing terminal on the right.
// Actions {0 = left, 1 = right} move deterministically; moving left from
// state 0 stays put; moving right from state n-1 enters the terminal, which
// pays reward 1. All other rewards are 0.
inline TabularMdp chain_mdp(int n, double gamma = 0.9) {
  if (n < 2) throw std::invalid_argument("chain_mdp: need n >= 2");
  TabularMdp m;
  m.name = "chain" + std::to_string(n);
  m.gamma = gamma;
  m.init(n + 1, 2);
  const int term = n;
  for (int s = 0; s < n; ++s) {
    m.prob_ref(s, 0, s > 0 ? s - 1 : 0) = 1.0;
    m.prob_ref(s, 1, s < n - 1 ? s + 1 : term) = 1.0;
  }
  m.terminal[term] = 1;
  m.reward[term] = 1.0;
  m.start_state = 0;
  m.best_return = 1.0;
  m.validate();
  return m;
}

// gridworld(w,h): deterministic four-connected grid, cell index y*w + x,
// start at (0,0), goal at (w-1,h-1). Moves into a wall stay in place. The
// goal is terminal and pays reward 1; every other reward is 0.
// Actions: 0 = up (y+1), 1 = right, 2 = down, 3 = left.
inline TabularMdp gridworld_mdp(int w, int h, double gamma = 0.9) {
  if (w < 2 || h < 2) throw std::invalid_argument("gridworld_mdp: need w,h >= 2");
  TabularMdp m;
  m.name = "gridworld" + std::to_string(w) + "x" + std::to_string(h);
  m.gamma = gamma;
  m.init(w * h, 4);
  const int goal = w * h - 1;
  auto idx = [w](int x, int y) { return y * w + x; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int s = idx(x, y);
      if (s == goal) continue;
      const int dx[4] = {0, 1, 0, -1};
      const int dy[4] = {1, 0, -1, 0};
      for (int a = 0; a < 4; ++a) {
        int nx = std::min(w - 1, std::max(0, x + dx[a]));
        int ny = std::min(h - 1, std::max(0, y + dy[a]));
        m.prob_ref(s, a, idx(nx, ny)) = 1.0;
      }
    }
  }
  m.terminal[goal] = 1;
  m.reward[goal] = 1.0;
  m.start_state = 0;
  m.best_return = 1.0;
  m.validate();
  return m;
}

// cliff: the 12x4 cliff walk. Bottom row holds start (0,0), the cliff cells
// (1..10, 0) and the goal (11,0). Entering an ordinary cell costs -1,
// entering a cliff cell costs -100 and ends the episode, entering the goal
// costs 0 and ends the episode. Actions as in gridworld.
inline TabularMdp cliff_mdp(double gamma = 0.99) {
  const int w = 12, h = 4;
  TabularMdp m;
  m.name = "cliff";
  m.gamma = gamma;
  m.init(w * h, 4);
  auto idx = [](int x, int y) { return y * 12 + x; };
  const int goal = idx(11, 0);
  for (int s = 0; s < w * h; ++s) m.reward[s] = -1.0;
  for (int x = 1; x <= 10; ++x) {
    m.terminal[idx(x, 0)] = 1;
    m.reward[idx(x, 0)] = -100.0;
  }
  m.terminal[goal] = 1;
  m.reward[goal] = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int s = idx(x, y);
      if (m.terminal[s]) continue;
      const int dx[4] = {0, 1, 0, -1};
      const int dy[4] = {1, 0, -1, 0};
      for (int a = 0; a < 4; ++a) {
        int nx = std::min(w - 1, std::max(0, x + dx[a]));
        int ny = std::min(h - 1, std::max(0, y + dy[a]));
        m.prob_ref(s, a, idx(nx, ny)) = 1.0;
      }
    }
  }
  m.start_state = idx(0, 0);
  m.best_return = -12.0;  // up, 11 right, down: 12 cells at -1, goal at 0
  m.validate();
  return m;
}

// Sampled-interaction wrapper around a TabularMdp. Observations are one-hot
// state encodings; transitions are drawn from the explicit tables with the
// instance RNG, so trajectories are reproducible from (seed, actions).
class TabularEnv final : public Env {
 public:
  TabularEnv(TabularMdp mdp, uint64_t seed, int max_episode_len = 500)
      : mdp_(std::move(mdp)), rng_(seed) {
    spec_.state_dim = mdp_.num_states;
    spec_.action_count = mdp_.num_actions;
    spec_.gamma = mdp_.gamma;
    spec_.max_episode_len = max_episode_len;
    obs_.assign(mdp_.num_states, 0.0);
    needs_reset_ = true;
  }

  const MdpSpec& spec() const override { return spec_; }
  const std::string& id() const override { return mdp_.name; }
  double max_return() const override { return mdp_.best_return; }
  const TabularMdp& mdp() const { return mdp_; }
  int state_index() const { return cur_; }

  std::vector<double> reset() override {
    cur_ = mdp_.start_state;
    steps_ = 0;
    needs_reset_ = false;
    encode();
    return obs_;
  }

  Transition step(int action) override {
    if (needs_reset_) throw std::logic_error(mdp_.name + "::step: episode already terminated");
    if (action < 0 || action >= mdp_.num_actions)
      throw std::invalid_argument(mdp_.name + "::step: bad action");
    Transition t;
    t.state = obs_;
    t.action = action;
    int s2 = sample_next(cur_, action);
    t.reward = mdp_.reward[s2];
    cur_ = s2;
    ++steps_;
    encode();
    t.next_state = obs_;
    t.done = mdp_.terminal[s2] != 0 ||
             (spec_.max_episode_len > 0 && steps_ >= spec_.max_episode_len);
    needs_reset_ = t.done;
    return t;
  }

  const std::vector<double>& state() const override { return obs_; }
  bool needs_reset() const override { return needs_reset_; }

 private:
  void encode() {
    std::fill(obs_.begin(), obs_.end(), 0.0);
    obs_[cur_] = 1.0;
  }

  int sample_next(int s, int a) {
    double u = rng_.uniform();
    double c = 0.0;
    int last = 0;
    for (int s2 = 0; s2 < mdp_.num_states; ++s2) {
      double pr = mdp_.prob(s, a, s2);
      if (pr <= 0.0) continue;
      c += pr;
      last = s2;
      if (u < c) return s2;
    }
    return last;
  }

  TabularMdp mdp_;
  MdpSpec spec_;
  Rng rng_;
  std::vector<double> obs_;
  int cur_ = 0;
  int steps_ = 0;
  bool needs_reset_ = true;
};

// Decodes a one-hot observation back to its state index.
inline int onehot_index(std::span<const double> obs) {
  int best = 0;
  for (size_t i = 1; i < obs.size(); ++i)
    if (obs[i] > obs[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace rl
