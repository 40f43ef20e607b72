#pragma once

#include <cmath>

#include "rl/env.hpp"

namespace rl {

// Classic cart-pole balancing task. Physics constants follow the standard
// testbed: gravity 9.8, cart mass 1.0, pole mass 0.1, pole half-length 0.5,
// force +-10, Euler integration with dt = 0.02, termination at |x| > 2.4 or
// |theta| > 12 degrees, episode capped at 200 steps. Reward is +1 per tick,
// so the episode return equals the episode length.
class CartPoleEnv final : public Env {
 public:
  explicit CartPoleEnv(uint64_t seed) : rng_(seed) {
    spec_.state_dim = 4;
    spec_.action_count = 2;
    spec_.gamma = 0.99;
    spec_.max_episode_len = 200;
    state_.assign(4, 0.0);
    needs_reset_ = true;
  }

  const MdpSpec& spec() const override { return spec_; }
  const std::string& id() const override { return id_; }
  double max_return() const override { return 200.0; }

  std::vector<double> reset() override {
    for (auto& v : state_) v = rng_.uniform(-0.05, 0.05);
    steps_ = 0;
    needs_reset_ = false;
    return state_;
  }

  Transition step(int action) override {
    if (needs_reset_) throw std::logic_error("CartPoleEnv::step: episode already terminated");
    if (action < 0 || action >= 2) throw std::invalid_argument("CartPoleEnv::step: bad action");

    Transition t;
    t.state = state_;
    t.action = action;

    double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];
    const double force = action == 1 ? kForceMag : -kForceMag;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
    const double theta_acc =
        (kGravity * sin_t - cos_t * temp) /
        (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

    x += kDt * x_dot;
    x_dot += kDt * x_acc;
    theta += kDt * theta_dot;
    theta_dot += kDt * theta_acc;
    state_ = {x, x_dot, theta, theta_dot};
    ++steps_;

    const bool out_of_bounds = std::abs(x) > kXThreshold || std::abs(theta) > kThetaThreshold;
    t.reward = 1.0;
    t.next_state = state_;
    t.done = out_of_bounds || steps_ >= spec_.max_episode_len;
    needs_reset_ = t.done;
    return t;
  }

  const std::vector<double>& state() const override { return state_; }
  bool needs_reset() const override { return needs_reset_; }

 private:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kTotalMass = kCartMass + kPoleMass;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kPoleMassLength = kPoleMass * kHalfLength;
  static constexpr double kForceMag = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kXThreshold = 2.4;
  static constexpr double kThetaThreshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;

  MdpSpec spec_;
  std::string id_ = "cartpole";
  Rng rng_;
  std::vector<double> state_;
  int steps_ = 0;
  bool needs_reset_ = true;
};

}  // namespace rl
