#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rl/adam.hpp"
#include "rl/losses.hpp"
#include "rl/network.hpp"
#include "rl/rollout.hpp"

namespace rl {

enum class PgAlgo { kA2C, kPPO };

struct PgConfig {
  int state_dim = 0;
  int action_count = 0;
  std::vector<int> hidden{128, 128};

  int env_count = 8;
  int rollout = 1024;  // total transitions per update, split across envs
  int batch = 32;      // PPO minibatch size
  int epochs = 3;      // PPO passes over the rollout
  double clip = 0.1;
  double gae_lambda = 0.95;
  double entropy_w = 0.01;
  double critic_w = 0.5;
  double gamma = 0.99;
  AdamConfig adam{};

  void validate() const {
    if (state_dim <= 0 || action_count < 2) throw std::invalid_argument("PgConfig: bad dims");
    if (env_count < 1 || rollout < env_count || rollout % env_count != 0)
      throw std::invalid_argument("PgConfig: rollout must be a positive multiple of env_count");
    if (clip <= 0.0 || clip >= 1.0) throw std::invalid_argument("PgConfig: clip must be in (0,1)");
    if (gae_lambda < 0.0 || gae_lambda > 1.0) throw std::invalid_argument("PgConfig: bad lambda");
    if (batch < 1 || epochs < 1) throw std::invalid_argument("PgConfig: bad batch/epochs");
  }

  int steps_per_env() const { return rollout / env_count; }
};

struct PgStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  long updates = 0;
};

// Shared-trunk actor-critic agent covering A2C (one combined step per fresh
// rollout) and PPO (several epochs of clipped-surrogate minibatch steps over
// the same rollout). Advantages come from truncated GAE and are never
// renormalized.
class PgAgent {
 public:
  PgAgent(PgAlgo algo, PgConfig cfg, uint64_t seed)
      : algo_(algo),
        cfg_(std::move(cfg)),
        spec_(make_mlp_spec(cfg_.state_dim, cfg_.hidden, HeadKind::kActorCritic,
                            cfg_.action_count)),
        init_rng_(stream_seed(seed, "net-init")),
        action_rng_(stream_seed(seed, "exploration")),
        shuffle_rng_(stream_seed(seed, "minibatch-shuffle")),
        params_(init_params(spec_, init_rng_)),
        opt_(params_, cfg_.adam) {
    cfg_.validate();
  }

  const PgConfig& config() const { return cfg_; }
  const NetworkSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  long param_version() const { return param_version_; }
  long updates() const { return updates_; }

  PolicyEval evaluate(const Mat& states) const {
    Mat out = forward(spec_, params_, states, NoiseDraw::zeros(spec_));
    PolicyEval pe;
    pe.probs = Mat(out.rows, cfg_.action_count);
    pe.values.resize(out.rows);
    for (int b = 0; b < out.rows; ++b) {
      for (int a = 0; a < cfg_.action_count; ++a) pe.probs(b, a) = out(b, a);
      pe.values[b] = out(b, cfg_.action_count);
    }
    return pe;
  }

  RolloutBatch collect(std::vector<std::unique_ptr<Env>>& envs, int steps_per_env = 0) {
    if (steps_per_env == 0) steps_per_env = cfg_.steps_per_env();
    return collect_rollout(
        envs, steps_per_env, [this](const Mat& s) { return evaluate(s); }, action_rng_,
        param_version_);
  }

  int act(std::span<const double> state) {
    Mat x(1, cfg_.state_dim);
    std::copy(state.begin(), state.end(), x.row(0).begin());
    PolicyEval pe = evaluate(x);
    return sample_categorical(pe.probs.row(0), action_rng_);
  }

  PgStats update(RolloutBatch& rollout) {
    if (rollout.param_version != param_version_)
      throw std::logic_error("PgAgent: rollout is stale (collected under different parameters)");
    compute_gae(rollout, cfg_.gamma, cfg_.gae_lambda);
    PgStats st = algo_ == PgAlgo::kA2C ? a2c_step(rollout) : ppo_step(rollout);
    ++param_version_;
    st.updates = updates_;
    return st;
  }

 private:
  // Combined actor + critic + entropy step over the whole rollout. The actor
  // term is -mean[log pi(a|s) * adv] with detached advantages and no gamma^t
  // weighting; the critic is MSE to detached value targets.
  PgStats a2c_step(const RolloutBatch& r) {
    PgStats st;
    const int n = r.size();
    const int A = cfg_.action_count;
    Tape tape;
    Mat out = forward(spec_, params_, r.states, NoiseDraw::zeros(spec_), &tape);
    Mat probs = slice_probs(out);

    LossOut actor = log_prob_loss(probs, r.actions, r.advantages);
    std::vector<int> vcol(n, A);
    LossOut critic = mse_loss(out, vcol, r.value_targets);
    LossOut ent = entropy_loss(probs);

    Mat dout = critic.dpred;  // already B x (A+1)
    dout *= cfg_.critic_w;
    for (int b = 0; b < n; ++b)
      for (int a = 0; a < A; ++a)
        dout(b, a) += actor.dpred(b, a) - cfg_.entropy_w * ent.dpred(b, a);

    ParamStore grads = ParamStore::zeros_like(params_);
    backward(spec_, tape, dout, grads);
    opt_.step(params_, grads);
    ++updates_;

    st.actor_loss = actor.value;
    st.critic_loss = critic.value;
    st.entropy = ent.value;
    st.total_loss = actor.value + cfg_.critic_w * critic.value - cfg_.entropy_w * ent.value;
    return st;
  }

  PgStats ppo_step(const RolloutBatch& r) {
    PgStats st;
    const int n = r.size();
    const int A = cfg_.action_count;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    int steps = 0;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      // Fisher-Yates with the dedicated shuffle stream.
      for (int i = n - 1; i > 0; --i) {
        int j = shuffle_rng_.uniform_int(i + 1);
        std::swap(order[i], order[j]);
      }
      for (int start = 0; start + cfg_.batch <= n; start += cfg_.batch) {
        const int B = cfg_.batch;
        Mat states(B, cfg_.state_dim);
        std::vector<int> actions(B);
        std::vector<double> old_probs(B), advs(B), vtargets(B);
        for (int k = 0; k < B; ++k) {
          int i = order[start + k];
          auto src = r.states.row(i);
          std::copy(src.begin(), src.end(), states.row(k).begin());
          actions[k] = r.actions[i];
          old_probs[k] = r.old_probs[i];
          advs[k] = r.advantages[i];
          vtargets[k] = r.value_targets[i];
        }
        Tape tape;
        Mat out = forward(spec_, params_, states, NoiseDraw::zeros(spec_), &tape);
        Mat probs = slice_probs(out);

        LossOut actor = clipped_ppo_loss(probs, actions, old_probs, advs, cfg_.clip);
        std::vector<int> vcol(B, A);
        LossOut critic = mse_loss(out, vcol, vtargets);
        LossOut ent = entropy_loss(probs);

        Mat dout = critic.dpred;
        dout *= cfg_.critic_w;
        for (int b = 0; b < B; ++b)
          for (int a = 0; a < A; ++a)
            dout(b, a) += actor.dpred(b, a) - cfg_.entropy_w * ent.dpred(b, a);

        ParamStore grads = ParamStore::zeros_like(params_);
        backward(spec_, tape, dout, grads);
        opt_.step(params_, grads);
        ++updates_;

        st.actor_loss += actor.value;
        st.critic_loss += critic.value;
        st.entropy += ent.value;
        ++steps;
      }
    }
    if (steps > 0) {
      st.actor_loss /= steps;
      st.critic_loss /= steps;
      st.entropy /= steps;
      st.total_loss = st.actor_loss + cfg_.critic_w * st.critic_loss - cfg_.entropy_w * st.entropy;
    }
    return st;
  }

  Mat slice_probs(const Mat& out) const {
    Mat probs(out.rows, cfg_.action_count);
    for (int b = 0; b < out.rows; ++b)
      for (int a = 0; a < cfg_.action_count; ++a) probs(b, a) = out(b, a);
    return probs;
  }

  PgAlgo algo_;
  PgConfig cfg_;
  NetworkSpec spec_;
  Rng init_rng_, action_rng_, shuffle_rng_;
  ParamStore params_;
  Adam opt_;
  long param_version_ = 0;
  long updates_ = 0;
};

}  // namespace rl
