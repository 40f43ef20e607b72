#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rl/rng.hpp"

namespace rl {

// Static description of an environment: observation dimension, number of
// discrete actions, discount and episode cap (0 = unbounded).
struct MdpSpec {
  int state_dim = 0;
  int action_count = 0;
  double gamma = 0.99;
  int max_episode_len = 0;  // 0 means unbounded

  void validate() const {
    if (state_dim <= 0) throw std::invalid_argument("MdpSpec: state_dim must be positive");
    if (action_count < 2) throw std::invalid_argument("MdpSpec: need at least two actions");
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("MdpSpec: gamma must be in [0,1)");
    if (max_episode_len < 0) throw std::invalid_argument("MdpSpec: bad max_episode_len");
    if (max_episode_len == 0 && gamma >= 1.0)
      throw std::invalid_argument("MdpSpec: unbounded episodes require gamma < 1");
  }
};

// One interaction record. The universal currency of every agent here.
struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> transitions;
  double episode_return = 0.0;

  int length() const { return static_cast<int>(transitions.size()); }
  void push(const Transition& t) {
    transitions.push_back(t);
    episode_return += t.reward;
  }
};

inline double discounted_return(const Trajectory& traj, double gamma) {
  double g = 0.0;
  double w = 1.0;
  for (const auto& t : traj.transitions) {
    g += w * t.reward;
    w *= gamma;
  }
  return g;
}

// Environment interface. Each instance owns its RNG; (seed, action sequence)
// determines the trajectory bit-exactly.
class Env {
 public:
  virtual ~Env() = default;

  virtual const MdpSpec& spec() const = 0;
  virtual const std::string& id() const = 0;
  // Highest achievable undiscounted episode return, used by run summaries.
  virtual double max_return() const = 0;

  virtual std::vector<double> reset() = 0;
  virtual Transition step(int action) = 0;

  virtual const std::vector<double>& state() const = 0;
  virtual bool needs_reset() const = 0;
};

// Steps each environment once, in order. Environments whose episode finished
// on the previous step are reset first, so transition i always starts from a
// live episode.
inline std::vector<Transition> vector_step(std::vector<std::unique_ptr<Env>>& envs,
                                           const std::vector<int>& actions) {
  if (envs.size() != actions.size())
    throw std::invalid_argument("vector_step: one action per environment required");
  std::vector<Transition> out;
  out.reserve(envs.size());
  for (size_t i = 0; i < envs.size(); ++i) {
    if (envs[i]->needs_reset()) envs[i]->reset();
    out.push_back(envs[i]->step(actions[i]));
  }
  return out;
}

}  // namespace rl
