#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rl/adam.hpp"
#include "rl/losses.hpp"
#include "rl/network.hpp"
#include "rl/pg_agent.hpp"
#include "rl/rollout.hpp"

namespace rl {

struct TrpoConfig {
  double delta = 0.01;        // KL trust-region radius
  int cg_iters = 10;
  double cg_tol = 1e-10;
  double damping = 1e-3;
  double backtrack = 0.5;
  int max_backtracks = 10;
  double fvp_eps = 1e-5;      // parameter displacement for the FD Hessian-vector product
  int critic_epochs = 5;
  int critic_batch = 64;

  void validate() const {
    if (delta <= 0.0) throw std::invalid_argument("TrpoConfig: delta must be positive");
    if (damping < 0.0) throw std::invalid_argument("TrpoConfig: damping must be nonnegative");
    if (cg_iters < 1 || max_backtracks < 1) throw std::invalid_argument("TrpoConfig: bad caps");
  }
};

struct TrpoReport {
  double cg_residual = 0.0;
  double kl = 0.0;
  double improvement = 0.0;
  double surrogate_grad_norm = 0.0;
  int cg_iters_used = 0;
  int backtracks = 0;
  bool accepted = false;
};

// Conjugate gradients for A x = b with A supplied as a matrix-vector
// callback. Returns x; reports the true final residual ||A x - b||.
inline std::vector<double> conjugate_gradient(
    const std::function<std::vector<double>(const std::vector<double>&)>& Av,
    const std::vector<double>& b, int max_iters, double tol, double* residual_out = nullptr,
    int* iters_out = nullptr) {
  std::vector<double> x(b.size(), 0.0), r = b, p = b;
  double rs = dot(r, r);
  int it = 0;
  for (; it < max_iters && std::sqrt(rs) > tol; ++it) {
    auto Ap = Av(p);
    double alpha = rs / dot(p, Ap);
    for (size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    double rs_new = dot(r, r);
    double beta = rs_new / rs;
    rs = rs_new;
    for (size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }
  if (iters_out) *iters_out = it;
  if (residual_out) {
    auto Ax = Av(x);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += (Ax[i] - b[i]) * (Ax[i] - b[i]);
    *residual_out = std::sqrt(s);
  }
  return x;
}

// Trust-region policy optimization over a separate-actor, separate-critic
// pair. The policy step solves (F + damping I) x = g with conjugate
// gradients, where F v is obtained as a central finite difference of the
// mean-KL gradient (the KL Hessian equals the Fisher matrix), scales the
// step to the delta radius and backtracks until the sampled KL is within
// delta and the surrogate improves. The critic is fitted afterwards by Adam
// on the GAE value targets.
class TrpoAgent {
 public:
  TrpoAgent(PgConfig pg, TrpoConfig trpo, uint64_t seed)
      : pg_(std::move(pg)),
        tcfg_(trpo),
        actor_spec_(make_mlp_spec(pg_.state_dim, pg_.hidden, HeadKind::kSoftmaxPolicy,
                                  pg_.action_count)),
        critic_spec_(make_mlp_spec(pg_.state_dim, pg_.hidden, HeadKind::kQValues, 1)),
        init_rng_(stream_seed(seed, "net-init")),
        action_rng_(stream_seed(seed, "exploration")),
        shuffle_rng_(stream_seed(seed, "minibatch-shuffle")),
        actor_(init_params(actor_spec_, init_rng_)),
        critic_(init_params(critic_spec_, init_rng_)),
        critic_opt_(critic_, pg_.adam) {
    pg_.validate();
    tcfg_.validate();
    // The critic head must tolerate action_count = 1.
    no_noise_actor_ = NoiseDraw::zeros(actor_spec_);
    no_noise_critic_ = NoiseDraw::zeros(critic_spec_);
  }

  const PgConfig& pg_config() const { return pg_; }
  const TrpoConfig& trpo_config() const { return tcfg_; }
  ParamStore& actor_params() { return actor_; }
  ParamStore& critic_params() { return critic_; }
  const NetworkSpec& actor_spec() const { return actor_spec_; }
  long param_version() const { return param_version_; }

  PolicyEval evaluate(const Mat& states) const {
    PolicyEval pe;
    pe.probs = forward(actor_spec_, actor_, states, no_noise_actor_);
    Mat v = forward(critic_spec_, critic_, states, no_noise_critic_);
    pe.values.resize(v.rows);
    for (int b = 0; b < v.rows; ++b) pe.values[b] = v(b, 0);
    return pe;
  }

  RolloutBatch collect(std::vector<std::unique_ptr<Env>>& envs, int steps_per_env = 0) {
    if (steps_per_env == 0) steps_per_env = pg_.steps_per_env();
    return collect_rollout(
        envs, steps_per_env, [this](const Mat& s) { return evaluate(s); }, action_rng_,
        param_version_);
  }

  int act(std::span<const double> state) {
    Mat x(1, pg_.state_dim);
    std::copy(state.begin(), state.end(), x.row(0).begin());
    PolicyEval pe = evaluate(x);
    return sample_categorical(pe.probs.row(0), action_rng_);
  }

  // Gradient of the mean KL(pi_old || pi_theta) over the rollout states,
  // flattened. At theta = theta_old this is zero; its directional
  // derivatives give Fisher-vector products.
  std::vector<double> kl_gradient(const ParamStore& theta, const Mat& states,
                                  const Mat& old_probs) const {
    Tape tape;
    Mat p = forward(actor_spec_, theta, states, no_noise_actor_, &tape);
    Mat dout(p.rows, p.cols);
    for (int b = 0; b < p.rows; ++b)
      for (int a = 0; a < p.cols; ++a)
        dout(b, a) = -old_probs(b, a) / std::max(p(b, a), 1e-300) / p.rows;
    ParamStore grads = ParamStore::zeros_like(theta);
    backward(actor_spec_, tape, dout, grads);
    return grads.flatten();
  }

  // Fisher-vector product via central differences of the KL gradient, with
  // the probe step scaled to the vector norm, plus damping.
  std::vector<double> fisher_vector_product(const std::vector<double>& v, const Mat& states,
                                            const Mat& old_probs) const {
    double vn = norm2(v);
    std::vector<double> out(v.size(), 0.0);
    if (vn == 0.0) return out;
    double h = tcfg_.fvp_eps / vn;
    ParamStore theta = actor_;
    auto flat = theta.flatten();
    std::vector<double> plus(flat.size()), minus(flat.size());
    for (size_t i = 0; i < flat.size(); ++i) {
      plus[i] = flat[i] + h * v[i];
      minus[i] = flat[i] - h * v[i];
    }
    theta.unflatten(plus);
    auto gp = kl_gradient(theta, states, old_probs);
    theta.unflatten(minus);
    auto gm = kl_gradient(theta, states, old_probs);
    for (size_t i = 0; i < out.size(); ++i)
      out[i] = (gp[i] - gm[i]) / (2.0 * h) + tcfg_.damping * v[i];
    return out;
  }

  TrpoReport update(RolloutBatch& rollout) {
    if (rollout.param_version != param_version_)
      throw std::logic_error("TrpoAgent: rollout is stale");
    compute_gae(rollout, pg_.gamma, pg_.gae_lambda);
    const int n = rollout.size();

    Mat old_probs = forward(actor_spec_, actor_, rollout.states, no_noise_actor_);

    // Surrogate gradient at theta_old: mean[grad log pi(a|s) * adv], which is
    // exactly the actor-critic gradient.
    TrpoReport rep;
    {
      Tape tape;
      Mat p = forward(actor_spec_, actor_, rollout.states, no_noise_actor_, &tape);
      Mat dout(p.rows, p.cols);
      for (int b = 0; b < n; ++b)
        dout(b, rollout.actions[b]) =
            rollout.advantages[b] / rollout.old_probs[b] / n;
      ParamStore gstore = ParamStore::zeros_like(actor_);
      backward(actor_spec_, tape, dout, gstore);
      g_ = gstore.flatten();
    }
    rep.surrogate_grad_norm = norm2(g_);
    double mean_adv = 0.0;
    for (int b = 0; b < n; ++b) mean_adv += rollout.advantages[b] / n;

    if (rep.surrogate_grad_norm > 1e-12) {
      auto fvp = [&](const std::vector<double>& v) {
        return fisher_vector_product(v, rollout.states, old_probs);
      };
      auto x = conjugate_gradient(fvp, g_, tcfg_.cg_iters, tcfg_.cg_tol, &rep.cg_residual,
                                  &rep.cg_iters_used);
      auto fx = fvp(x);
      double quad = dot(x, fx);
      double scale = quad > 0.0 ? std::sqrt(2.0 * tcfg_.delta / quad) : 0.0;

      auto theta_old = actor_.flatten();
      std::vector<double> trial(theta_old.size());
      double step = scale;
      for (int k = 0; k <= tcfg_.max_backtracks; ++k) {
        for (size_t i = 0; i < trial.size(); ++i) trial[i] = theta_old[i] + step * x[i];
        ParamStore theta_try = actor_;
        theta_try.unflatten(trial);
        Mat p_new = forward(actor_spec_, theta_try, rollout.states, no_noise_actor_);

        double L_new = 0.0, kl = 0.0;
        for (int b = 0; b < n; ++b) {
          L_new += p_new(b, rollout.actions[b]) / rollout.old_probs[b] * rollout.advantages[b] / n;
          for (int a = 0; a < p_new.cols; ++a) {
            double po = old_probs(b, a);
            if (po > 0.0) kl += po * std::log(po / std::max(p_new(b, a), 1e-300)) / n;
          }
        }
        rep.kl = kl;
        rep.improvement = L_new - mean_adv;
        rep.backtracks = k;
        if (kl <= tcfg_.delta && rep.improvement >= 0.0) {
          actor_ = theta_try;
          rep.accepted = true;
          break;
        }
        step *= tcfg_.backtrack;
      }
    } else {
      rep.accepted = true;  // zero gradient: zero step, zero KL
    }

    fit_critic(rollout);
    ++param_version_;
    return rep;
  }

 private:
  void fit_critic(const RolloutBatch& r) {
    const int n = r.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < tcfg_.critic_epochs; ++epoch) {
      for (int i = n - 1; i > 0; --i) {
        int j = shuffle_rng_.uniform_int(i + 1);
        std::swap(order[i], order[j]);
      }
      for (int start = 0; start + tcfg_.critic_batch <= n; start += tcfg_.critic_batch) {
        const int B = tcfg_.critic_batch;
        Mat states(B, pg_.state_dim);
        std::vector<double> targets(B);
        std::vector<int> cols(B, 0);
        for (int k = 0; k < B; ++k) {
          int i = order[start + k];
          auto src = r.states.row(i);
          std::copy(src.begin(), src.end(), states.row(k).begin());
          targets[k] = r.value_targets[i];
        }
        Tape tape;
        Mat out = forward(critic_spec_, critic_, states, no_noise_critic_, &tape);
        LossOut lo = mse_loss(out, cols, targets);
        ParamStore grads = ParamStore::zeros_like(critic_);
        backward(critic_spec_, tape, lo.dpred, grads);
        critic_opt_.step(critic_, grads);
      }
    }
  }

  PgConfig pg_;
  TrpoConfig tcfg_;
  NetworkSpec actor_spec_, critic_spec_;
  Rng init_rng_, action_rng_, shuffle_rng_;
  ParamStore actor_, critic_;
  Adam critic_opt_;
  NoiseDraw no_noise_actor_, no_noise_critic_;
  std::vector<double> g_;
  long param_version_ = 0;
};

}  // namespace rl
