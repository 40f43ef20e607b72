#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rl/adam.hpp"
#include "rl/distribution.hpp"
#include "rl/env.hpp"
#include "rl/losses.hpp"
#include "rl/network.hpp"
#include "rl/nstep.hpp"
#include "rl/replay_buffer.hpp"
#include "rl/rng.hpp"

namespace rl {

enum class DuelingConfig { kOff, kMax, kMean };
enum class DistKind { kNone, kCategorical, kQuantile };
enum class ValueLossKind { kMse, kHuber };

// epsilon(t) = floor + span * exp(-t / tau); starts at floor+span, decays
// monotonically to floor.
struct EpsSchedule {
  double floor = 0.01;
  double span = 0.99;
  double tau = 30000.0;

  double at(long t) const { return floor + span * std::exp(-static_cast<double>(t) / tau); }
};

struct ValueAgentConfig {
  int state_dim = 0;
  int action_count = 0;
  std::vector<int> hidden{128, 128};

  bool double_dqn = false;
  bool noisy = false;
  bool prioritized = false;
  DuelingConfig dueling = DuelingConfig::kOff;
  int n_step = 1;
  DistKind dist = DistKind::kNone;
  int atoms = 51;
  double v_min = -10.0;
  double v_max = 10.0;

  int batch = 32;
  int target_period = 1000;
  bool use_target = true;
  double gamma = 0.99;
  EpsSchedule eps;
  ValueLossKind loss = ValueLossKind::kMse;

  int buffer_capacity = 1'000'000;
  int warmup = 10'000;
  double per_alpha = 0.5;
  double per_beta0 = 0.4;
  long per_beta_steps = 100'000;

  AdamConfig adam{};
  double sigma_init = 0.5;

  void validate() const {
    if (state_dim <= 0 || action_count < 2) throw std::invalid_argument("ValueAgentConfig: bad dims");
    if (n_step < 1) throw std::invalid_argument("ValueAgentConfig: n_step must be >= 1");
    if (target_period < 1) throw std::invalid_argument("ValueAgentConfig: target period must be >= 1");
    if (dist == DistKind::kCategorical && !(v_min < v_max))
      throw std::invalid_argument("ValueAgentConfig: categorical support needs v_min < v_max");
    if (dist != DistKind::kNone && atoms < 1)
      throw std::invalid_argument("ValueAgentConfig: bad atom count");
    if (batch < 1 || buffer_capacity < batch)
      throw std::invalid_argument("ValueAgentConfig: bad batch/capacity");
  }

  NetworkSpec network_spec() const {
    HeadKind head;
    DuelingMode mode = dueling == DuelingConfig::kMax ? DuelingMode::kMax : DuelingMode::kMean;
    bool duel = dueling != DuelingConfig::kOff;
    switch (dist) {
      case DistKind::kNone:
        head = duel ? HeadKind::kDueling : HeadKind::kQValues;
        break;
      case DistKind::kCategorical:
        head = duel ? HeadKind::kDuelingCategorical : HeadKind::kCategorical;
        if (duel) mode = DuelingMode::kSoftmaxAtoms;
        break;
      case DistKind::kQuantile:
        head = duel ? HeadKind::kDuelingQuantile : HeadKind::kQuantile;
        break;
    }
    return make_mlp_spec(state_dim, hidden, head, action_count,
                         dist == DistKind::kNone ? 1 : atoms, mode, noisy);
  }

  std::vector<double> support_grid() const {
    std::vector<double> z(atoms);
    for (int i = 0; i < atoms; ++i)
      z[i] = v_min + (v_max - v_min) * static_cast<double>(i) / (atoms - 1);
    return z;
  }
};

// Table-6 style Rainbow: double + dueling + noisy + prioritized + 3-step +
// categorical head.
inline ValueAgentConfig rainbow_config(int state_dim, int action_count) {
  ValueAgentConfig c;
  c.state_dim = state_dim;
  c.action_count = action_count;
  c.double_dqn = true;
  c.noisy = true;
  c.prioritized = true;
  c.dueling = DuelingConfig::kMean;
  c.n_step = 3;
  c.dist = DistKind::kCategorical;
  return c;
}

// Q estimates implied by a head output: identity for scalar heads, the
// support-weighted mean for categorical heads, the atom mean for quantile
// heads.
inline Mat head_q_values(const NetworkSpec& spec, const Mat& out, std::span<const double> grid) {
  switch (spec.head) {
    case HeadKind::kQValues:
    case HeadKind::kDueling:
      return out;
    case HeadKind::kCategorical:
    case HeadKind::kDuelingCategorical: {
      Mat q(out.rows, spec.action_count);
      for (int b = 0; b < out.rows; ++b)
        for (int a = 0; a < spec.action_count; ++a) {
          double m = 0.0;
          for (int i = 0; i < spec.atoms; ++i) m += grid[i] * out(b, a * spec.atoms + i);
          q(b, a) = m;
        }
      return q;
    }
    case HeadKind::kQuantile:
    case HeadKind::kDuelingQuantile: {
      Mat q(out.rows, spec.action_count);
      for (int b = 0; b < out.rows; ++b)
        for (int a = 0; a < spec.action_count; ++a) {
          double m = 0.0;
          for (int i = 0; i < spec.atoms; ++i) m += out(b, a * spec.atoms + i);
          q(b, a) = m / spec.atoms;
        }
      return q;
    }
    default:
      throw std::logic_error("head_q_values: not a value head");
  }
}

inline int row_argmax_lowest(std::span<const double> row) {
  int best = 0;
  for (size_t a = 1; a < row.size(); ++a)
    if (row[a] > row[best]) best = static_cast<int>(a);
  return best;
}

namespace detail {

inline Mat batch_states(const std::vector<const NStepRecord*>& recs, bool final_state) {
  const int dim = static_cast<int>(final_state ? recs[0]->final_state.size() : recs[0]->state.size());
  Mat m(static_cast<int>(recs.size()), dim);
  for (size_t b = 0; b < recs.size(); ++b) {
    const auto& v = final_state ? recs[b]->final_state : recs[b]->state;
    std::copy(v.begin(), v.end(), m.row(static_cast<int>(b)).begin());
  }
  return m;
}

}  // namespace detail

// Scalar bootstrap targets
//   y = r_sum + (1 - done) * gamma^n_used * Q_eval(s_N, argmax_a Q_sel(s_N, a)).
// Vanilla DQN passes the target network as both selector and evaluator;
// double DQN selects with the online network; twin DQN selects with the
// other twin's target network.
inline std::vector<double> dqn_targets(const std::vector<const NStepRecord*>& recs,
                                       const NetworkSpec& spec, const ParamStore& selector,
                                       const ParamStore& evaluator, const NoiseDraw& noise_sel,
                                       const NoiseDraw& noise_eval, double gamma,
                                       std::span<const double> grid = {}) {
  Mat next = detail::batch_states(recs, true);
  Mat out_eval = forward(spec, evaluator, next, noise_eval);
  Mat q_eval = head_q_values(spec, out_eval, grid);
  Mat q_sel = (&selector == &evaluator && noise_sel.zeroed && noise_eval.zeroed)
                  ? q_eval
                  : head_q_values(spec, forward(spec, selector, next, noise_sel), grid);
  std::vector<double> y(recs.size());
  for (size_t b = 0; b < recs.size(); ++b) {
    const auto& r = *recs[b];
    double boot = 0.0;
    if (!r.done) {
      int a = row_argmax_lowest(q_sel.row(static_cast<int>(b)));
      boot = std::pow(gamma, r.n_used) * q_eval(static_cast<int>(b), a);
    }
    y[b] = r.reward_sum + boot;
  }
  return y;
}

// Categorical targets: the evaluator's probability row at the greedy action,
// atoms shifted to r_sum + gamma^n * z_i, projected back onto the grid.
// Finished episodes become a point mass at r_sum.
inline Mat categorical_targets(const std::vector<const NStepRecord*>& recs,
                               const NetworkSpec& spec, const ParamStore& selector,
                               const ParamStore& evaluator, const NoiseDraw& noise_sel,
                               const NoiseDraw& noise_eval, double gamma,
                               std::span<const double> grid) {
  const int atoms = spec.atoms;
  Mat next = detail::batch_states(recs, true);
  Mat out_eval = forward(spec, evaluator, next, noise_eval);
  Mat q_sel = (&selector == &evaluator && noise_sel.zeroed && noise_eval.zeroed)
                  ? head_q_values(spec, out_eval, grid)
                  : head_q_values(spec, forward(spec, selector, next, noise_sel), grid);
  Mat targets(static_cast<int>(recs.size()), atoms);
  for (size_t b = 0; b < recs.size(); ++b) {
    const auto& r = *recs[b];
    DiscreteDistribution shifted;
    if (r.done) {
      shifted = DiscreteDistribution::point_mass(r.reward_sum);
    } else {
      int a = row_argmax_lowest(q_sel.row(static_cast<int>(b)));
      double scale = std::pow(gamma, r.n_used);
      shifted.support.resize(atoms);
      shifted.probs.resize(atoms);
      for (int i = 0; i < atoms; ++i) {
        shifted.support[i] = r.reward_sum + scale * grid[i];
        shifted.probs[i] = out_eval(static_cast<int>(b), a * atoms + i);
      }
    }
    auto proj = categorical_projection(shifted, grid);
    std::copy(proj.probs.begin(), proj.probs.end(), targets.row(static_cast<int>(b)).begin());
  }
  return targets;
}

// Quantile targets: y_j = r_sum + (1 - done) * gamma^n * zeta_j(s_N, a*),
// with a* greedy under the selector's atom means. No projection is needed.
inline Mat quantile_targets(const std::vector<const NStepRecord*>& recs, const NetworkSpec& spec,
                            const ParamStore& selector, const ParamStore& evaluator,
                            const NoiseDraw& noise_sel, const NoiseDraw& noise_eval,
                            double gamma) {
  const int atoms = spec.atoms;
  Mat next = detail::batch_states(recs, true);
  Mat out_eval = forward(spec, evaluator, next, noise_eval);
  Mat q_sel = (&selector == &evaluator && noise_sel.zeroed && noise_eval.zeroed)
                  ? head_q_values(spec, out_eval, {})
                  : head_q_values(spec, forward(spec, selector, next, noise_sel), {});
  Mat targets(static_cast<int>(recs.size()), atoms);
  for (size_t b = 0; b < recs.size(); ++b) {
    const auto& r = *recs[b];
    if (r.done) {
      for (int j = 0; j < atoms; ++j) targets(static_cast<int>(b), j) = r.reward_sum;
      continue;
    }
    int a = row_argmax_lowest(q_sel.row(static_cast<int>(b)));
    double scale = std::pow(gamma, r.n_used);
    for (int j = 0; j < atoms; ++j)
      targets(static_cast<int>(b), j) = r.reward_sum + scale * out_eval(static_cast<int>(b), a * atoms + j);
  }
  return targets;
}

struct TrainStats {
  double loss = 0.0;
  double mean_priority = 0.0;
  double mean_is_weight = 0.0;
  double max_priority = 0.0;
  long buffer_size = 0;
  double noise_magnitude = 0.0;
  long updates = 0;
};

// One value-based agent: a network, its frozen target copy, a replay buffer
// and an N-step assembler per environment instance. Covers DQN and all its
// configured extensions; Rainbow is this agent with every flag on.
class ValueAgent {
 public:
  ValueAgent(ValueAgentConfig cfg, uint64_t seed, int env_count = 1)
      : cfg_(std::move(cfg)),
        spec_(cfg_.network_spec()),
        init_rng_(stream_seed(seed, "net-init")),
        noise_rng_(stream_seed(seed, "noise")),
        replay_rng_(stream_seed(seed, "replay-sampling")),
        explore_rng_(stream_seed(seed, "exploration")),
        params_(init_params(spec_, init_rng_, cfg_.sigma_init)),
        target_(params_),
        opt_(params_, cfg_.adam),
        buffer_(cfg_.buffer_capacity, cfg_.prioritized, cfg_.per_alpha),
        grid_(cfg_.dist == DistKind::kCategorical ? cfg_.support_grid() : std::vector<double>{}),
        taus_(cfg_.dist == DistKind::kQuantile ? quantile_midpoints(cfg_.atoms)
                                               : std::vector<double>{}) {
    cfg_.validate();
    for (int i = 0; i < env_count; ++i) assemblers_.emplace_back(cfg_.n_step, cfg_.gamma);
  }

  const ValueAgentConfig& config() const { return cfg_; }
  const NetworkSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ParamStore& target_params() const { return cfg_.use_target ? target_ : params_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long env_steps() const { return env_steps_; }
  long updates() const { return updates_; }
  std::span<const double> grid() const { return grid_; }

  // Twin mode: greedy selection for targets is done by another agent's
  // (target) parameters.
  void set_external_selector(const ParamStore* sel) { external_selector_ = sel; }

  double epsilon(long t) const { return cfg_.noisy ? 0.0 : cfg_.eps.at(t); }

  // Epsilon-greedy over the Q estimate; noisy agents draw fresh layer noise
  // instead of using epsilon. Argmax ties break to the lowest index.
  int select_action(std::span<const double> state, long t) {
    if (!cfg_.noisy && explore_rng_.uniform() < cfg_.eps.at(t))
      return explore_rng_.uniform_int(cfg_.action_count);
    return greedy_action(state);
  }

  int greedy_action(std::span<const double> state) {
    Mat x(1, cfg_.state_dim);
    std::copy(state.begin(), state.end(), x.row(0).begin());
    NoiseDraw noise = cfg_.noisy ? NoiseDraw::sample(spec_, noise_rng_) : NoiseDraw::zeros(spec_);
    Mat q = head_q_values(spec_, forward(spec_, params_, x, noise), grid_);
    return row_argmax_lowest(q.row(0));
  }

  // Noise-free Q estimate, for inspection and tests.
  Mat q_of(std::span<const double> state) {
    Mat x(1, cfg_.state_dim);
    std::copy(state.begin(), state.end(), x.row(0).begin());
    return head_q_values(spec_, forward(spec_, params_, x, NoiseDraw::zeros(spec_)), grid_);
  }

  void observe(const Transition& t, int env_index = 0) {
    ++env_steps_;
    for (auto& rec : assemblers_[env_index].push(t)) buffer_.push(rec);
  }

  void refresh_target() { target_ = params_; }

  // One gradient step from a sampled batch; no-op (nullopt) until the buffer
  // holds warmup records.
  std::optional<TrainStats> train_step() {
    if (buffer_.size() < std::max(cfg_.warmup, cfg_.batch)) return std::nullopt;

    std::vector<int> slots;
    std::vector<double> weights;
    double mean_w = 1.0;
    if (cfg_.prioritized) {
      double beta = beta_schedule(cfg_.per_beta0, cfg_.per_beta_steps, env_steps_);
      auto samples = buffer_.sample_prioritized(cfg_.batch, beta, replay_rng_);
      mean_w = 0.0;
      for (const auto& s : samples) {
        slots.push_back(s.slot);
        weights.push_back(s.weight);
        mean_w += s.weight / cfg_.batch;
      }
    } else {
      slots = buffer_.sample_uniform(cfg_.batch, replay_rng_);
    }

    std::vector<const NStepRecord*> recs;
    recs.reserve(slots.size());
    for (int s : slots) recs.push_back(&buffer_.at(s));

    const ParamStore& evaluator = target_params();
    const ParamStore& selector = external_selector_   ? *external_selector_
                                 : cfg_.double_dqn    ? params_
                                                      : evaluator;
    NoiseDraw noise_sel = cfg_.noisy ? NoiseDraw::sample(spec_, noise_rng_) : NoiseDraw::zeros(spec_);
    NoiseDraw noise_eval = cfg_.noisy ? NoiseDraw::sample(spec_, noise_rng_) : NoiseDraw::zeros(spec_);
    NoiseDraw noise_train = cfg_.noisy ? NoiseDraw::sample(spec_, noise_rng_) : NoiseDraw::zeros(spec_);

    std::vector<int> actions;
    actions.reserve(recs.size());
    for (const auto* r : recs) actions.push_back(r->action);

    Mat states = detail::batch_states(recs, false);
    Tape tape;
    Mat out = forward(spec_, params_, states, noise_train, &tape);

    LossOut lo;
    switch (cfg_.dist) {
      case DistKind::kNone: {
        auto y = dqn_targets(recs, spec_, selector, evaluator, noise_sel, noise_eval, cfg_.gamma);
        lo = cfg_.loss == ValueLossKind::kMse ? mse_loss(out, actions, y, weights)
                                              : huber_loss(out, actions, y, weights);
        break;
      }
      case DistKind::kCategorical: {
        Mat y = categorical_targets(recs, spec_, selector, evaluator, noise_sel, noise_eval,
                                    cfg_.gamma, grid_);
        lo = kl_to_target_loss(out, actions, cfg_.atoms, y, weights);
        break;
      }
      case DistKind::kQuantile: {
        Mat y = quantile_targets(recs, spec_, selector, evaluator, noise_sel, noise_eval,
                                 cfg_.gamma);
        lo = quantile_regression_loss(out, actions, cfg_.atoms, y, taus_, weights);
        break;
      }
    }

    ParamStore grads = ParamStore::zeros_like(params_);
    backward(spec_, tape, lo.dpred, grads);
    opt_.step(params_, grads);
    ++updates_;

    if (cfg_.prioritized) {
      std::vector<double> rho(lo.per_sample.size());
      for (size_t i = 0; i < rho.size(); ++i) {
        double l = lo.per_sample[i];
        rho[i] = cfg_.dist == DistKind::kNone ? std::sqrt(std::max(0.0, l)) : l;
      }
      buffer_.update_priorities(slots, rho);
    }

    if (cfg_.use_target && updates_ % cfg_.target_period == 0) refresh_target();

    TrainStats st;
    st.loss = lo.value;
    st.mean_priority = buffer_.mean_priority();
    st.mean_is_weight = mean_w;
    st.max_priority = buffer_.max_rho();
    st.buffer_size = buffer_.size();
    st.noise_magnitude = noise_magnitude(tape);
    st.updates = updates_;
    return st;
  }

 private:
  double noise_magnitude(const Tape& tape) const {
    if (!cfg_.noisy) return 0.0;
    double acc = 0.0;
    long n = 0;
    auto add = [&](const detail::AffineRec& rec) {
      if (!rec.noisy || rec.e.a.empty()) return;
      const Mat& sig = params_.at(rec.prefix + "Wsig");
      for (size_t k = 0; k < sig.a.size(); ++k) {
        acc += std::abs(sig.a[k] * rec.e.a[k]);
        ++n;
      }
    };
    for (const auto& tr : tape.trunk)
      if (!tr.is_relu) add(tr.aff);
    add(tape.head_a);
    if (tape.has_head_b) add(tape.head_b);
    return n > 0 ? acc / n : 0.0;
  }

  ValueAgentConfig cfg_;
  NetworkSpec spec_;
  Rng init_rng_, noise_rng_, replay_rng_, explore_rng_;
  ParamStore params_;
  ParamStore target_;
  Adam opt_;
  ReplayBuffer buffer_;
  std::vector<double> grid_;
  std::vector<double> taus_;
  std::vector<NStepAssembler> assemblers_;
  const ParamStore* external_selector_ = nullptr;
  long env_steps_ = 0;
  long updates_ = 0;
};

// Two independent DQNs that cross-evaluate each other's targets. Control of
// the environment alternates per episode and each twin stores only the
// experience gathered while it was acting, so the replay buffers stay
// disjoint.
class TwinValueAgent {
 public:
  TwinValueAgent(const ValueAgentConfig& cfg, uint64_t seed, int env_count = 1) {
    twins_[0] = std::make_unique<ValueAgent>(cfg, stream_seed(seed, "twin-a"), env_count);
    twins_[1] = std::make_unique<ValueAgent>(cfg, stream_seed(seed, "twin-b"), env_count);
    twins_[0]->set_external_selector(&twins_[1]->target_params());
    twins_[1]->set_external_selector(&twins_[0]->target_params());
    acting_.assign(env_count, 0);
  }

  ValueAgent& twin(int i) { return *twins_[i]; }
  int acting(int env_index = 0) const { return acting_[env_index]; }

  double epsilon(long t) const { return twins_[0]->epsilon(t); }

  int select_action(std::span<const double> state, long t, int env_index = 0) {
    return twins_[acting_[env_index]]->select_action(state, t);
  }

  void observe(const Transition& t, int env_index = 0) {
    twins_[acting_[env_index]]->observe(t, env_index);
    if (t.done) acting_[env_index] ^= 1;
  }

  std::optional<TrainStats> train_step() {
    auto a = twins_[0]->train_step();
    auto b = twins_[1]->train_step();
    if (!a && !b) return std::nullopt;
    TrainStats st;
    int n = 0;
    for (const auto& s : {a, b})
      if (s) {
        st.loss += s->loss;
        st.mean_priority += s->mean_priority;
        st.mean_is_weight += s->mean_is_weight;
        st.max_priority = std::max(st.max_priority, s->max_priority);
        st.buffer_size += s->buffer_size;
        st.noise_magnitude += s->noise_magnitude;
        st.updates = std::max(st.updates, s->updates);
        ++n;
      }
    st.loss /= n;
    st.mean_priority /= n;
    st.mean_is_weight /= n;
    st.noise_magnitude /= n;
    return st;
  }

 private:
  std::unique_ptr<ValueAgent> twins_[2];
  std::vector<int> acting_;
};

}  // namespace rl
