#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rl/report.hpp"
#include "rl/runner.hpp"

using namespace rl;

namespace {

namespace fs = std::filesystem;

std::string tmp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / "rlbench_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// metrics.csv with the wall-clock column blanked out.
std::string metrics_without_wall(const std::string& dir) {
  auto md = detail_report::read_metrics(dir);
  int wall = md.col("wall_ms");
  std::string out;
  for (auto& r : md.rows) {
    r[wall] = "";
    for (size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += "\n";
  }
  return out;
}

RunConfig quick_cfg(const std::string& algo, const std::string& env, long steps,
                    const std::string& out) {
  RunConfig cfg = resolve_config(algo, env, "", {});
  cfg.steps = steps;
  cfg.out_dir = out;
  cfg.hidden = {16};
  cfg.replay_warmup = 16;
  cfg.agent_batch = 8;
  cfg.replay_capacity = 4096;
  cfg.pg_envs = 2;
  cfg.pg_rollout = 32;
  cfg.pg_batch = 8;
  return cfg;
}

}  // namespace

TEST_CASE("config snapshot round-trips to an identical configuration") {
  RunConfig cfg = resolve_config("rainbow", "cartpole", "", {{"steps", "123"}, {"lr", "0.0005"}});
  std::string snap = serialize_config(cfg);
  RunConfig back = resolve_config("", "", snap, {});
  CHECK(serialize_config(back) == snap);
}

TEST_CASE("unknown config keys are rejected") {
  RunConfig cfg;
  CHECK_THROWS_AS(apply_config_text(cfg, "no.such.key = 3\n"), std::invalid_argument);
  CHECK_THROWS_AS(resolve_config("dqn", "cartpole", "", {{"bogus", "1"}}), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_text(cfg, "agent.dueling = sideways\n"), std::invalid_argument);
  CHECK_NOTHROW(apply_config_text(cfg, "# comment only\n\nagent.batch = 64\n"));
  CHECK(cfg.agent_batch == 64);
}

TEST_CASE("algo ids toggle the documented flag combinations") {
  auto rb = resolve_config("rainbow", "chain5", "", {});
  CHECK(rb.agent_double);
  CHECK(rb.agent_noisy);
  CHECK(rb.agent_prioritized);
  CHECK(rb.agent_dueling == "mean");
  CHECK(rb.agent_n_step == 3);
  CHECK(rb.agent_dist == "categorical");

  auto c51 = resolve_config("c51", "chain5", "", {});
  CHECK(c51.agent_dist == "categorical");
  CHECK_FALSE(c51.agent_use_target);
  // ... and the flag can be put back by config for the with-target variant.
  auto c51t = resolve_config("c51", "chain5", "", {{"agent.use_target", "1"}});
  CHECK(c51t.agent_use_target);

  CHECK_THROWS(resolve_config("no-such-algo", "cartpole", "", {}));
}

TEST_CASE("steps = 0 still produces valid artifacts") {
  auto out = tmp_dir("zero");
  auto cfg = quick_cfg("dqn", "cartpole", 0, out);
  auto res = run(cfg);
  CHECK(res.steps == 0);
  CHECK(fs::exists(out + "/metrics.csv"));
  CHECK(fs::exists(out + "/config.snapshot"));
  CHECK(fs::exists(out + "/checkpoint.bin"));
  auto md = detail_report::read_metrics(out);
  CHECK(md.rows.empty());
  CHECK(!md.header.empty());
}

TEST_CASE("identical (config, seed) reproduce metrics modulo wall clock") {
  auto out1 = tmp_dir("det1");
  auto out2 = tmp_dir("det2");
  for (const std::string algo : {"dqn", "ppo"}) {
    auto c1 = quick_cfg(algo, "cartpole", 300, out1);
    auto c2 = quick_cfg(algo, "cartpole", 300, out2);
    c1.seed = c2.seed = 424242;
    run(c1);
    run(c2);
    CHECK(metrics_without_wall(out1) == metrics_without_wall(out2));
  }
}

TEST_CASE("different seeds actually change the run") {
  auto out1 = tmp_dir("seed1");
  auto out2 = tmp_dir("seed2");
  auto c1 = quick_cfg("dqn", "cartpole", 300, out1);
  auto c2 = quick_cfg("dqn", "cartpole", 300, out2);
  c1.seed = 1;
  c2.seed = 2;
  run(c1);
  run(c2);
  CHECK(metrics_without_wall(out1) != metrics_without_wall(out2));
}

TEST_CASE("the written snapshot reparses to the executed configuration") {
  auto out = tmp_dir("snap");
  auto cfg = quick_cfg("qr-dqn", "chain5", 50, out);
  run(cfg);
  RunConfig back = resolve_config("", "", slurp(out + "/config.snapshot"), {});
  CHECK(serialize_config(back) == serialize_config(cfg));
}

TEST_CASE("summarize: never-reached marker, ordering, recomputed FPS") {
  auto out1 = tmp_dir("sum1");
  auto out2 = tmp_dir("sum2");
  // chain5 with a random-ish fresh agent reaches return 1 quickly; cartpole
  // within 120 steps cannot reach 200.
  auto c1 = quick_cfg("dqn", "chain5", 400, out1);
  auto c2 = quick_cfg("dqn", "cartpole", 120, out2);
  auto r1 = run(c1);
  run(c2);
  auto rows = summarize({out1, out2});
  REQUIRE(rows.size() == 2);
  // chain5 mean return is nonnegative, cartpole mean is ~20+; order by mean.
  CHECK(rows[0].mean_return >= rows[1].mean_return);
  for (const auto& row : rows) {
    if (row.env == "cartpole") CHECK(row.reached_episode == -1);
    if (row.env == "chain5" && r1.first_episode_at_max > 0)
      CHECK(row.reached_episode == r1.first_episode_at_max);
  }
  // FPS cross-check from raw metrics.
  auto md = detail_report::read_metrics(out1);
  double steps = std::stod(md.rows.back()[md.col("env_step")]);
  double secs = std::stod(md.rows.back()[md.col("wall_ms")]) / 1000.0;
  for (const auto& row : rows)
    if (row.dir == out1) CHECK(row.fps == doctest::Approx(steps / secs).epsilon(0.01));

  std::ostringstream os;
  write_comparison_csv(os, rows);
  CHECK(os.str().find("reached_episode") != std::string::npos);
  CHECK(os.str().find("-") != std::string::npos);
}

TEST_CASE("curves: window 1 passes raw returns; smoothing matches a direct oracle") {
  auto out = tmp_dir("curves");
  auto cfg = quick_cfg("dqn", "chain5", 300, out);
  run(cfg);
  auto md = detail_report::read_metrics(out);
  auto eps = detail_report::episode_series(md);
  REQUIRE(!eps.empty());

  emit_curves({out}, 1);
  {
    std::ifstream f(out + "/curve_step.csv");
    std::string line;
    std::getline(f, line);  // header
    size_t i = 0;
    while (std::getline(f, line)) {
      auto parts = detail_report::split_csv(line);
      CHECK(std::stod(parts[1]) == doctest::Approx(eps[i].ret));
      ++i;
    }
    CHECK(i == eps.size());
  }

  const int W = 5;
  emit_curves({out}, W);
  {
    std::ifstream f(out + "/curve_wall.csv");
    std::string line;
    std::getline(f, line);
    size_t i = 0;
    while (std::getline(f, line)) {
      auto parts = detail_report::split_csv(line);
      double expect = 0;
      int count = 0;
      for (int j = static_cast<int>(i); j >= 0 && count < W; --j, ++count)
        expect += eps[j].ret;
      expect /= count;
      CHECK(std::stod(parts[1]) == doctest::Approx(expect).epsilon(1e-9));
      ++i;
    }
  }
}

TEST_CASE("constant-return runs give constant curves") {
  auto out = tmp_dir("const");
  // chain2 with action budget: every episode return is 1 once the agent acts
  // right twice; regardless, all returns in {0, 1}; use window 1 and check
  // values pass through unchanged (constant when the series is constant).
  auto cfg = quick_cfg("dqn", "chain2", 100, out);
  run(cfg);
  emit_curves({out}, 1);
  auto md = detail_report::read_metrics(out);
  auto eps = detail_report::episode_series(md);
  std::ifstream f(out + "/curve_step.csv");
  std::string line;
  std::getline(f, line);
  size_t i = 0;
  while (std::getline(f, line)) {
    auto parts = detail_report::split_csv(line);
    CHECK(std::stod(parts[0]) == doctest::Approx(eps[i].env_step));
    ++i;
  }
}

TEST_CASE("the L knob: updates per interaction equal L/E on full sweeps") {
  auto out = tmp_dir("lknob");
  auto cfg = quick_cfg("dqn", "chain5", 400, out);
  cfg.threads = 4;                  // E
  cfg.updates_per_vector_step = 2;  // L
  cfg.replay_warmup = 8;
  cfg.agent_batch = 8;
  auto res = run(cfg);
  CHECK(res.steps == 400);
  // Warm-up consumes the first sweeps; afterwards each full sweep of E
  // interactions is followed by exactly L updates.
  const long sweeps = 400 / 4;
  const long warm_sweeps = 1;  // the 8-record threshold is met after sweep 2's observations
  CHECK(res.updates == (sweeps - warm_sweeps) * 2);
  // Expressed per interaction, that is L/E once warm.
  double per_interaction =
      static_cast<double>(res.updates) / static_cast<double>((sweeps - warm_sweeps) * 4);
  CHECK(per_interaction == doctest::Approx(2.0 / 4.0));
}

TEST_CASE("every algorithm id runs end to end for a short budget") {
  for (const std::string algo : {"double-dqn", "dueling-double-dqn", "twin-dqn", "c51", "qr-dqn",
                                 "rainbow", "a2c", "trpo", "reinforce"}) {
    auto out = tmp_dir("smoke_" + algo);
    auto cfg = quick_cfg(algo, "cartpole", 150, out);
    cfg.trpo_rollout = 64;
    cfg.reinforce_episodes = 2;
    auto res = run(cfg);
    CHECK(res.steps == 150);
    CHECK(fs::exists(out + "/checkpoint.bin"));
  }
}
