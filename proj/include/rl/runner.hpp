#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "rl/env_factory.hpp"
#include "rl/reinforce.hpp"
#include "rl/run_config.hpp"

namespace rl {

struct RunResult {
  std::string out_dir;
  long steps = 0;
  long episodes = 0;
  double best_return = -std::numeric_limits<double>::infinity();
  double return_sum = 0.0;
  long first_episode_at_max = -1;  // 1-based; -1 when the max was never reached
  long updates = 0;

  double mean_return() const { return episodes > 0 ? return_sum / episodes : 0.0; }
};

namespace detail_run {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const std::vector<std::string>& columns)
      : f_(path), cols_(columns.size()) {
    if (!f_) throw std::runtime_error("cannot open " + path);
    for (size_t i = 0; i < columns.size(); ++i) f_ << (i ? "," : "") << columns[i];
    f_ << "\n";
  }

  void row(const std::vector<std::string>& vals) {
    for (size_t i = 0; i < vals.size(); ++i) f_ << (i ? "," : "") << vals[i];
    f_ << "\n";
  }

 private:
  std::ofstream f_;
  size_t cols_;
};

struct EpisodeTracker {
  std::vector<double> ep_return;
  RunResult* res;
  double max_return;

  EpisodeTracker(int envs, RunResult* r, double maxr)
      : ep_return(envs, 0.0), res(r), max_return(maxr) {}

  // Returns (episode_index, episode_return) columns when an episode ends.
  std::pair<std::string, std::string> on_transition(int e, const Transition& t) {
    ep_return[e] += t.reward;
    if (!t.done) return {"", ""};
    ++res->episodes;
    double r = ep_return[e];
    res->return_sum += r;
    res->best_return = std::max(res->best_return, r);
    if (r >= max_return && res->first_episode_at_max < 0)
      res->first_episode_at_max = res->episodes;
    ep_return[e] = 0.0;
    return {std::to_string(res->episodes), fmt(r)};
  }
};

inline ParamStore merge_stores(
    const std::vector<std::pair<std::string, const ParamStore*>>& parts) {
  ParamStore out;
  for (const auto& [prefix, store] : parts)
    for (size_t i = 0; i < store->tensor_count(); ++i) {
      Mat& m = out.add(prefix + store->name(i), store->tensor(i).rows, store->tensor(i).cols);
      m = store->tensor(i);
    }
  return out;
}

}  // namespace detail_run

// Executes one experiment: exactly cfg.steps environment interactions,
// deterministic for a fixed (config, seed) apart from the wall-clock column.
// Writes metrics.csv, config.snapshot and checkpoint.bin into cfg.out_dir.
inline RunResult run(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;
  using detail_run::fmt;

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream snap(cfg.out_dir + "/config.snapshot");
    snap << serialize_config(cfg);
  }

  auto probe = make_env(cfg.env, 0);
  const int state_dim = probe->spec().state_dim;
  const int action_count = probe->spec().action_count;
  const double max_ret = probe->max_return();

  RunResult res;
  res.out_dir = cfg.out_dir;
  const auto t0 = clock::now();
  auto wall_ms = [&] {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  auto make_envs = [&](int count) {
    std::vector<std::unique_ptr<Env>> envs;
    for (int i = 0; i < count; ++i)
      envs.push_back(make_env(cfg.env, stream_seed(cfg.seed, "env") + static_cast<uint64_t>(i)));
    return envs;
  };

  if (is_value_algo(cfg.algo)) {
    const int E = std::max(1, cfg.threads);
    const int L = std::max(1, cfg.updates_per_vector_step);
    auto envs = make_envs(E);
    auto vcfg = cfg.value_agent_config(state_dim, action_count);

    std::unique_ptr<ValueAgent> single;
    std::unique_ptr<TwinValueAgent> twin;
    if (cfg.algo == "twin-dqn")
      twin = std::make_unique<TwinValueAgent>(vcfg, cfg.seed, E);
    else
      single = std::make_unique<ValueAgent>(vcfg, cfg.seed, E);

    detail_run::MetricsWriter mw(
        cfg.out_dir + "/metrics.csv",
        {"wall_ms", "env_step", "episode", "episode_return", "loss", "epsilon", "mean_priority",
         "mean_is_weight", "max_priority", "buffer_size", "noise_magnitude", "updates"});
    detail_run::EpisodeTracker tracker(E, &res, max_ret);
    TrainStats last{};
    bool have_stats = false;
    long t = 0;
    while (t < cfg.steps) {
      const int sweep = static_cast<int>(std::min<long>(E, cfg.steps - t));
      for (int e = 0; e < sweep; ++e) {
        if (envs[e]->needs_reset()) envs[e]->reset();
        auto& state = envs[e]->state();
        int a = twin ? twin->select_action(state, t, e) : single->select_action(state, t);
        Transition tr = envs[e]->step(a);
        if (twin)
          twin->observe(tr, e);
        else
          single->observe(tr, e);
        ++t;
        auto [ep_i, ep_r] = tracker.on_transition(e, tr);
        double eps = twin ? twin->epsilon(t) : single->epsilon(t);
        mw.row({fmt(wall_ms()), std::to_string(t), ep_i, ep_r,
                have_stats ? fmt(last.loss) : "", fmt(eps),
                have_stats ? fmt(last.mean_priority) : "",
                have_stats ? fmt(last.mean_is_weight) : "",
                have_stats ? fmt(last.max_priority) : "",
                have_stats ? std::to_string(last.buffer_size) : "",
                have_stats ? fmt(last.noise_magnitude) : "", std::to_string(res.updates)});
      }
      for (int l = 0; l < L; ++l) {
        auto st = twin ? twin->train_step() : single->train_step();
        if (st) {
          last = *st;
          have_stats = true;
          ++res.updates;
        }
      }
    }
    res.steps = t;
    ParamStore ckpt = twin ? detail_run::merge_stores({{"twin0.", &twin->twin(0).params()},
                                                       {"twin1.", &twin->twin(1).params()}})
                           : single->params();
    ckpt.save_file(cfg.out_dir + "/checkpoint.bin");
  } else if (cfg.algo == "a2c" || cfg.algo == "ppo") {
    const int E = cfg.pg_envs;
    auto envs = make_envs(E);
    PgAgent agent(cfg.algo == "a2c" ? PgAlgo::kA2C : PgAlgo::kPPO,
                  cfg.pg_config(state_dim, action_count), cfg.seed);

    detail_run::MetricsWriter mw(cfg.out_dir + "/metrics.csv",
                                 {"wall_ms", "env_step", "episode", "episode_return", "loss",
                                  "entropy", "updates"});
    detail_run::EpisodeTracker tracker(E, &res, max_ret);
    PgStats last{};
    bool have_stats = false;
    long t = 0;
    while (t < cfg.steps) {
      long remaining = cfg.steps - t;
      int per_env = static_cast<int>(std::min<long>(agent.config().steps_per_env(), remaining / E));
      if (per_env == 0) {
        // Tail shorter than one vector step: consume it without updating.
        for (int e = 0; e < remaining; ++e) {
          if (envs[e]->needs_reset()) envs[e]->reset();
          Transition tr = envs[e]->step(agent.act(envs[e]->state()));
          ++t;
          auto [ep_i, ep_r] = tracker.on_transition(e, tr);
          mw.row({fmt(wall_ms()), std::to_string(t), ep_i, ep_r,
                  have_stats ? fmt(last.total_loss) : "", have_stats ? fmt(last.entropy) : "",
                  std::to_string(res.updates)});
        }
        break;
      }
      RolloutBatch ro = agent.collect(envs, per_env);
      for (int tt = 0; tt < per_env; ++tt)
        for (int e = 0; e < E; ++e) {
          int i = ro.idx(e, tt);
          Transition tr;
          tr.reward = ro.rewards[i];
          tr.done = ro.dones[i] != 0;
          ++t;
          auto [ep_i, ep_r] = tracker.on_transition(e, tr);
          mw.row({fmt(wall_ms()), std::to_string(t), ep_i, ep_r,
                  have_stats ? fmt(last.total_loss) : "", have_stats ? fmt(last.entropy) : "",
                  std::to_string(res.updates)});
        }
      const int min_update = cfg.algo == "ppo" ? agent.config().batch : 1;
      if (ro.size() >= min_update) {
        last = agent.update(ro);
        have_stats = true;
        res.updates = last.updates;
      }
    }
    res.steps = t;
    agent.params().save_file(cfg.out_dir + "/checkpoint.bin");
  } else if (cfg.algo == "trpo") {
    const int E = cfg.pg_envs;
    auto envs = make_envs(E);
    TrpoAgent agent(cfg.pg_config(state_dim, action_count, /*trpo_sizes=*/true),
                    cfg.trpo_config(), cfg.seed);

    detail_run::MetricsWriter mw(
        cfg.out_dir + "/metrics.csv",
        {"wall_ms", "env_step", "episode", "episode_return", "loss", "kl", "improvement",
         "cg_iters", "backtracks", "updates"});
    detail_run::EpisodeTracker tracker(E, &res, max_ret);
    TrpoReport last{};
    bool have_stats = false;
    long t = 0;
    while (t < cfg.steps) {
      long remaining = cfg.steps - t;
      int per_env =
          static_cast<int>(std::min<long>(agent.pg_config().steps_per_env(), remaining / E));
      if (per_env == 0) {
        for (int e = 0; e < remaining; ++e) {
          if (envs[e]->needs_reset()) envs[e]->reset();
          Transition tr = envs[e]->step(agent.act(envs[e]->state()));
          ++t;
          auto [ep_i, ep_r] = tracker.on_transition(e, tr);
          mw.row({fmt(wall_ms()), std::to_string(t), ep_i, ep_r, "",
                  have_stats ? fmt(last.kl) : "", have_stats ? fmt(last.improvement) : "",
                  have_stats ? std::to_string(last.cg_iters_used) : "",
                  have_stats ? std::to_string(last.backtracks) : "", std::to_string(res.updates)});
        }
        break;
      }
      RolloutBatch ro = agent.collect(envs, per_env);
      for (int tt = 0; tt < per_env; ++tt)
        for (int e = 0; e < E; ++e) {
          int i = ro.idx(e, tt);
          Transition tr;
          tr.reward = ro.rewards[i];
          tr.done = ro.dones[i] != 0;
          ++t;
          auto [ep_i, ep_r] = tracker.on_transition(e, tr);
          mw.row({fmt(wall_ms()), std::to_string(t), ep_i, ep_r, "",
                  have_stats ? fmt(last.kl) : "", have_stats ? fmt(last.improvement) : "",
                  have_stats ? std::to_string(last.cg_iters_used) : "",
                  have_stats ? std::to_string(last.backtracks) : "", std::to_string(res.updates)});
        }
      last = agent.update(ro);
      have_stats = true;
      ++res.updates;
    }
    res.steps = t;
    detail_run::merge_stores({{"actor.", &agent.actor_params()},
                              {"critic.", &agent.critic_params()}})
        .save_file(cfg.out_dir + "/checkpoint.bin");
  } else if (cfg.algo == "reinforce") {
    auto envs = make_envs(1);
    ReinforceAgent agent(state_dim, action_count, cfg.hidden, cfg.gamma, cfg.reinforce_episodes,
                         cfg.reinforce_baseline == "constant" ? BaselineMode::kConstantOptimal
                                                              : BaselineMode::kNone,
                         cfg.adam(), cfg.seed);
    detail_run::MetricsWriter mw(cfg.out_dir + "/metrics.csv",
                                 {"wall_ms", "env_step", "episode", "episode_return", "loss",
                                  "updates"});
    long t = 0;
    while (t < cfg.steps) {
      std::vector<Trajectory> episodes;
      bool updated = false;
      long consumed = agent.collect_and_update(*envs[0], cfg.steps - t, &episodes, &updated);
      long base = t;
      long offset = 0;
      for (const auto& ep : episodes) {
        offset += ep.length();
        ++res.episodes;
        res.return_sum += ep.episode_return;
        res.best_return = std::max(res.best_return, ep.episode_return);
        if (ep.episode_return >= max_ret && res.first_episode_at_max < 0)
          res.first_episode_at_max = res.episodes;
        mw.row({fmt(wall_ms()), std::to_string(base + offset), std::to_string(res.episodes),
                fmt(ep.episode_return), "", std::to_string(res.updates)});
      }
      t += consumed;
      if (updated) ++res.updates;
    }
    res.steps = t;
    agent.params().save_file(cfg.out_dir + "/checkpoint.bin");
  } else {
    throw std::invalid_argument("run: unknown algo '" + cfg.algo + "'");
  }

  return res;
}

}  // namespace rl
