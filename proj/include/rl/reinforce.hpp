#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rl/adam.hpp"
#include "rl/env.hpp"
#include "rl/losses.hpp"
#include "rl/network.hpp"
#include "rl/rollout.hpp"

namespace rl {

enum class BaselineMode { kNone, kConstantOptimal, kValue };

using ValueFn = std::function<double(std::span<const double>)>;

// Monte-Carlo policy gradient over complete episodes:
//   g = 1/N sum_traj sum_t gamma^t grad log pi(a_t|s_t) (G_t - b),
// with G_t the discounted reward-to-go. Baselines: none, the state-independent
// optimal constant (returns weighted by squared score norms), or a provided
// state-value function. Returns the ascent direction for J.
inline ParamStore reinforce_gradient(const std::vector<Trajectory>& episodes,
                                     const NetworkSpec& actor_spec, const ParamStore& actor,
                                     double gamma, BaselineMode mode,
                                     const ValueFn* value_fn = nullptr) {
  if (episodes.empty()) throw std::invalid_argument("reinforce_gradient: no episodes");
  if (mode == BaselineMode::kValue && !value_fn)
    throw std::invalid_argument("reinforce_gradient: value baseline needs a value function");
  const NoiseDraw no_noise = NoiseDraw::zeros(actor_spec);
  const double N = static_cast<double>(episodes.size());

  // Reward-to-go per (episode, step).
  std::vector<std::vector<double>> togo(episodes.size());
  for (size_t e = 0; e < episodes.size(); ++e) {
    const auto& tr = episodes[e].transitions;
    togo[e].resize(tr.size());
    double g = 0.0;
    for (int t = static_cast<int>(tr.size()) - 1; t >= 0; --t) {
      g = tr[t].reward + gamma * g;
      togo[e][t] = g;
    }
  }

  double constant_baseline = 0.0;
  if (mode == BaselineMode::kConstantOptimal) {
    // b = [sum gamma^t ||grad log pi||^2 G_t] / [sum ||grad log pi||^2],
    // score norms taken over the full parameter vector via per-sample
    // backward passes.
    double num = 0.0, den = 0.0;
    for (size_t e = 0; e < episodes.size(); ++e) {
      double gpow = 1.0;
      for (size_t t = 0; t < episodes[e].transitions.size(); ++t) {
        const auto& tr = episodes[e].transitions[t];
        Mat x(1, actor_spec.input_dim);
        std::copy(tr.state.begin(), tr.state.end(), x.row(0).begin());
        Tape tape;
        Mat p = forward(actor_spec, actor, x, no_noise, &tape);
        Mat dout(1, p.cols);
        dout(0, tr.action) = 1.0 / p(0, tr.action);
        ParamStore score = ParamStore::zeros_like(actor);
        backward(actor_spec, tape, dout, score);
        auto flat = score.flatten();
        double sq = dot(flat, flat);
        num += gpow * sq * togo[e][t];
        den += sq;
        gpow *= gamma;
      }
    }
    constant_baseline = den > 0.0 ? num / den : 0.0;
  }

  // One batched pass: rows are all (episode, step) pairs, the log-prob
  // coefficients carry gamma^t (G_t - b) / N. log_prob_loss is the negated
  // objective, so the ascent gradient is minus its gradient.
  int total = 0;
  for (const auto& ep : episodes) total += ep.length();
  Mat states(total, actor_spec.input_dim);
  std::vector<int> actions(total);
  std::vector<double> coeffs(total);
  int row = 0;
  for (size_t e = 0; e < episodes.size(); ++e) {
    double gpow = 1.0;
    for (size_t t = 0; t < episodes[e].transitions.size(); ++t) {
      const auto& tr = episodes[e].transitions[t];
      std::copy(tr.state.begin(), tr.state.end(), states.row(row).begin());
      actions[row] = tr.action;
      double b = mode == BaselineMode::kNone              ? 0.0
                 : mode == BaselineMode::kConstantOptimal ? constant_baseline
                                                          : (*value_fn)(tr.state);
      coeffs[row] = gpow * (togo[e][t] - b) * total / N;  // undo the 1/B in log_prob_loss
      gpow *= gamma;
      ++row;
    }
  }
  Tape tape;
  Mat p = forward(actor_spec, actor, states, no_noise, &tape);
  LossOut lo = log_prob_loss(p, actions, coeffs);
  ParamStore grads = ParamStore::zeros_like(actor);
  backward(actor_spec, tape, lo.dpred, grads);
  for (size_t i = 0; i < grads.tensor_count(); ++i)
    for (auto& v : grads.tensor(i).a) v = -v;
  return grads;
}

// Plays complete episodes with a softmax policy network and ascends the
// REINFORCE gradient with Adam.
class ReinforceAgent {
 public:
  ReinforceAgent(int state_dim, int action_count, std::vector<int> hidden, double gamma,
                 int episodes_per_update, BaselineMode mode, AdamConfig adam, uint64_t seed)
      : spec_(make_mlp_spec(state_dim, hidden, HeadKind::kSoftmaxPolicy, action_count)),
        gamma_(gamma),
        episodes_per_update_(episodes_per_update),
        mode_(mode),
        init_rng_(stream_seed(seed, "net-init")),
        action_rng_(stream_seed(seed, "exploration")),
        params_(init_params(spec_, init_rng_)),
        opt_(params_, adam) {}

  const NetworkSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }

  int act(std::span<const double> state) {
    Mat x(1, spec_.input_dim);
    std::copy(state.begin(), state.end(), x.row(0).begin());
    Mat p = forward(spec_, params_, x, NoiseDraw::zeros(spec_));
    return sample_categorical(p.row(0), action_rng_);
  }

  // Collects one batch of episodes (bounded by max_steps interactions) and
  // applies a single gradient step. Returns the number of env steps consumed;
  // a truncated final batch is discarded without updating.
  long collect_and_update(Env& env, long max_steps, std::vector<Trajectory>* out_episodes,
                          bool* updated = nullptr) {
    std::vector<Trajectory> episodes;
    long steps = 0;
    while (static_cast<int>(episodes.size()) < episodes_per_update_ && steps < max_steps) {
      Trajectory traj;
      env.reset();
      while (steps < max_steps) {
        int a = act(env.state());
        Transition t = env.step(a);
        traj.push(t);
        ++steps;
        if (t.done) break;
      }
      if (!traj.transitions.empty() && traj.transitions.back().done) episodes.push_back(traj);
    }
    bool did_update = static_cast<int>(episodes.size()) == episodes_per_update_;
    if (did_update) {
      ParamStore g = reinforce_gradient(episodes, spec_, params_, gamma_, mode_);
      for (size_t i = 0; i < g.tensor_count(); ++i)
        for (auto& v : g.tensor(i).a) v = -v;  // Adam minimizes
      opt_.step(params_, g);
    }
    if (updated) *updated = did_update;
    if (out_episodes) *out_episodes = std::move(episodes);
    return steps;
  }

 private:
  NetworkSpec spec_;
  double gamma_;
  int episodes_per_update_;
  BaselineMode mode_;
  Rng init_rng_, action_rng_;
  ParamStore params_;
  Adam opt_;
};

}  // namespace rl
