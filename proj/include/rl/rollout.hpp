#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "rl/env.hpp"
#include "rl/mat.hpp"
#include "rl/rng.hpp"

namespace rl {

struct PolicyEval {
  Mat probs;                   // B x |A| policy rows
  std::vector<double> values;  // B critic estimates
};

using PolicyEvalFn = std::function<PolicyEval(const Mat& states)>;

// Ordered on-policy transitions from env_count parallel instances, laid out
// env-major: env e occupies rows [e*steps_per_env, (e+1)*steps_per_env).
// Behavior probabilities and collection-time values are immutable after
// collection; advantages and value targets are filled by compute_gae.
struct RolloutBatch {
  int env_count = 0;
  int steps_per_env = 0;
  Mat states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<uint8_t> dones;
  std::vector<double> old_probs;
  std::vector<double> values;
  std::vector<double> bootstrap_values;  // per env, V at the rollout cut (0 if terminal)
  std::vector<double> advantages;
  std::vector<double> value_targets;
  long param_version = 0;

  int size() const { return env_count * steps_per_env; }
  int idx(int e, int t) const { return e * steps_per_env + t; }
};

inline int sample_categorical(std::span<const double> probs, Rng& rng) {
  double u = rng.uniform();
  double c = 0.0;
  int last = 0;
  for (size_t a = 0; a < probs.size(); ++a) {
    if (probs[a] <= 0.0) continue;
    c += probs[a];
    last = static_cast<int>(a);
    if (u < c) return last;
  }
  return last;
}

// Steps every environment steps_per_env times under the current policy,
// storing actions, rewards, behavior probabilities and value estimates.
// Environments auto-reset at episode boundaries inside the window.
inline RolloutBatch collect_rollout(std::vector<std::unique_ptr<Env>>& envs, int steps_per_env,
                                    const PolicyEvalFn& eval, Rng& action_rng,
                                    long param_version) {
  const int E = static_cast<int>(envs.size());
  if (E == 0 || steps_per_env <= 0) throw std::invalid_argument("collect_rollout: empty rollout");
  const int dim = envs[0]->spec().state_dim;

  RolloutBatch r;
  r.env_count = E;
  r.steps_per_env = steps_per_env;
  r.param_version = param_version;
  const int n = E * steps_per_env;
  r.states = Mat(n, dim);
  r.actions.resize(n);
  r.rewards.resize(n);
  r.dones.resize(n);
  r.old_probs.resize(n);
  r.values.resize(n);
  r.bootstrap_values.assign(E, 0.0);

  Mat cur(E, dim);
  for (int t = 0; t < steps_per_env; ++t) {
    for (int e = 0; e < E; ++e) {
      if (envs[e]->needs_reset()) envs[e]->reset();
      auto st = envs[e]->state();
      std::copy(st.begin(), st.end(), cur.row(e).begin());
    }
    PolicyEval pe = eval(cur);
    for (int e = 0; e < E; ++e) {
      int a = sample_categorical(pe.probs.row(e), action_rng);
      Transition tr = envs[e]->step(a);
      int i = r.idx(e, t);
      std::copy(tr.state.begin(), tr.state.end(), r.states.row(i).begin());
      r.actions[i] = a;
      r.rewards[i] = tr.reward;
      r.dones[i] = tr.done ? 1 : 0;
      r.old_probs[i] = pe.probs(e, a);
      r.values[i] = pe.values[e];
    }
  }

  // Bootstrap values at the rollout cut for environments still mid-episode.
  for (int e = 0; e < E; ++e) {
    if (envs[e]->needs_reset()) continue;
    auto st = envs[e]->state();
    std::copy(st.begin(), st.end(), cur.row(e).begin());
  }
  PolicyEval pe = eval(cur);
  for (int e = 0; e < E; ++e)
    r.bootstrap_values[e] = envs[e]->needs_reset() ? 0.0 : pe.values[e];
  return r;
}

// Truncated generalized advantage estimation. Within each episode segment of
// a rollout the available k-step advantage estimators are ensembled with
// weights lambda^(k-1) and normalized by the geometric partial sum
// 1 + lambda + ... + lambda^(n-1). Written in terms of the one-step errors
// delta_t this gives
//   A_t = sum_j gamma^j delta_{t+j} * lambda^j (1 - lambda^(n-j)) / (1 - lambda^n)
// for segments cut by the rollout end (n = steps to the cut), and the plain
// geometric sum  A_t = sum_j (gamma lambda)^j delta_{t+j}  when the episode
// finishes inside the rollout (every estimator is then available, and those
// past the end all equal the Monte-Carlo return). lambda = 0 recovers the
// one-step advantage; lambda = 1 on a completed episode recovers the
// Monte-Carlo return minus the value baseline. Value targets are advantage
// plus the state value.
inline void compute_gae(RolloutBatch& r, double gamma, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("compute_gae: bad lambda");
  const int T = r.steps_per_env;
  r.advantages.assign(r.size(), 0.0);
  r.value_targets.assign(r.size(), 0.0);

  std::vector<double> delta(T);
  for (int e = 0; e < r.env_count; ++e) {
    // One-step TD errors for this environment's slice.
    for (int t = 0; t < T; ++t) {
      int i = r.idx(e, t);
      double next_v;
      if (r.dones[i])
        next_v = 0.0;
      else if (t + 1 < T)
        next_v = r.values[r.idx(e, t + 1)];
      else
        next_v = r.bootstrap_values[e];
      delta[t] = r.rewards[i] + gamma * next_v - r.values[i];
    }
    // Episode segments within the slice.
    int seg_start = 0;
    while (seg_start < T) {
      int seg_end = seg_start;
      while (seg_end + 1 < T && !r.dones[r.idx(e, seg_end)]) ++seg_end;
      bool finished = r.dones[r.idx(e, seg_end)] != 0;
      for (int t = seg_start; t <= seg_end; ++t) {
        int n = seg_end - t + 1;
        double acc = 0.0;
        double gpow = 1.0;
        for (int j = 0; j < n; ++j) {
          double w;
          if (finished) {
            w = std::pow(lambda, j);
          } else if (lambda == 1.0) {
            w = static_cast<double>(n - j) / n;
          } else {
            w = std::pow(lambda, j) * (1.0 - std::pow(lambda, n - j)) / (1.0 - std::pow(lambda, n));
          }
          acc += gpow * w * delta[t + j];
          gpow *= gamma;
        }
        int i = r.idx(e, t);
        r.advantages[i] = acc;
        r.value_targets[i] = acc + r.values[i];
      }
      seg_start = seg_end + 1;
    }
  }
}

}  // namespace rl
