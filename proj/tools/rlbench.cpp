// Experiment harness: seeded runs, comparison tables and training curves.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rl/report.hpp"
#include "rl/runner.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rlbench - reinforcement learning benchmark harness"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "execute one seeded training run");
  std::string algo, env_id, config_path, out_dir;
  long steps = -1;
  long seed = -1;
  int threads = -1;
  int upvs = -1;
  std::vector<std::string> sets;
  run_cmd->add_option("--algo", algo,
                      "algorithm id (dqn, double-dqn, dueling-dqn, dueling-double-dqn, twin-dqn, "
                      "c51, qr-dqn, rainbow, a2c, ppo, trpo, reinforce)");
  run_cmd->add_option("--env", env_id, "environment id (cartpole, chain<N>, gridworld<W>x<H>, cliff)");
  run_cmd->add_option("--steps", steps, "total environment interactions");
  run_cmd->add_option("--seed", seed, "master seed");
  run_cmd->add_option("--config", config_path, "key = value config file");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--threads", threads, "parallel env instances for value agents");
  run_cmd->add_option("--updates-per-vector-step", upvs,
                      "training steps after each vector step (value agents)");
  run_cmd->add_option("--set", sets, "extra key=value overrides")->take_all();

  // summarize
  auto* sum_cmd = app.add_subcommand("summarize", "comparison table over finished runs");
  std::vector<std::string> sum_dirs;
  std::string sum_csv;
  sum_cmd->add_option("dirs", sum_dirs, "run directories")->required();
  sum_cmd->add_option("--csv", sum_csv, "also write the table as CSV to this path");

  // curves
  auto* cur_cmd = app.add_subcommand("curves", "write smoothed training curves per run");
  std::vector<std::string> cur_dirs;
  int window = 10;
  cur_cmd->add_option("dirs", cur_dirs, "run directories")->required();
  cur_cmd->add_option("--window", window, "moving-average window (1 = raw)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      std::string file_text = config_path.empty() ? "" : read_file(config_path);
      std::vector<std::pair<std::string, std::string>> kvs;
      if (steps >= 0) kvs.emplace_back("steps", std::to_string(steps));
      if (seed >= 0) kvs.emplace_back("seed", std::to_string(seed));
      if (!out_dir.empty()) kvs.emplace_back("out", out_dir);
      if (threads > 0) kvs.emplace_back("threads", std::to_string(threads));
      if (upvs > 0) kvs.emplace_back("updates_per_vector_step", std::to_string(upvs));
      for (const auto& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got " + s);
        kvs.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      rl::RunConfig cfg = rl::resolve_config(algo, env_id, file_text, kvs);
      rl::RunResult res = rl::run(cfg);
      std::cout << "run complete: " << res.steps << " steps, " << res.episodes << " episodes, "
                << res.updates << " updates\n"
                << "mean return " << res.mean_return() << ", best " << res.best_return;
      if (res.first_episode_at_max > 0)
        std::cout << ", max return first reached at episode " << res.first_episode_at_max;
      std::cout << "\nartifacts in " << res.out_dir << "\n";
    } else if (*sum_cmd) {
      auto rows = rl::summarize(sum_dirs);
      std::cout << rl::format_comparison(rows);
      if (!sum_csv.empty()) {
        std::ofstream f(sum_csv);
        rl::write_comparison_csv(f, rows);
      }
    } else if (*cur_cmd) {
      rl::emit_curves(cur_dirs, window);
      std::cout << "curve_step.csv and curve_wall.csv written to each run directory\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
