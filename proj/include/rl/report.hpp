#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rl/env_factory.hpp"
#include "rl/run_config.hpp"

namespace rl {

namespace detail_report {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct MetricsData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("metrics.csv: missing column " + name);
  }
};

inline MetricsData read_metrics(const std::string& dir) {
  std::ifstream f(dir + "/metrics.csv");
  if (!f) throw std::runtime_error("cannot open " + dir + "/metrics.csv");
  MetricsData md;
  std::string line;
  if (std::getline(f, line)) md.header = split_csv(line);
  while (std::getline(f, line))
    if (!line.empty()) md.rows.push_back(split_csv(line));
  return md;
}

inline RunConfig read_snapshot(const std::string& dir) {
  std::ifstream f(dir + "/config.snapshot");
  if (!f) throw std::runtime_error("cannot open " + dir + "/config.snapshot");
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  return resolve_config("", "", text, {});
}

struct EpisodePoint {
  long episode;
  double env_step;
  double wall_s;
  double ret;
};

inline std::vector<EpisodePoint> episode_series(const MetricsData& md) {
  std::vector<EpisodePoint> out;
  int c_ep = md.col("episode");
  int c_ret = md.col("episode_return");
  int c_step = md.col("env_step");
  int c_wall = md.col("wall_ms");
  for (const auto& r : md.rows) {
    if (r[c_ep].empty()) continue;
    out.push_back({std::stol(r[c_ep]), std::stod(r[c_step]), std::stod(r[c_wall]) / 1000.0,
                   std::stod(r[c_ret])});
  }
  return out;
}

}  // namespace detail_report

struct ComparisonRow {
  std::string dir;
  std::string algo;
  std::string env;
  long reached_episode = -1;  // first episode hitting the env's max return
  double mean_return = 0.0;
  double fps = 0.0;
  long episodes = 0;
};

// Per-run summary recomputed purely from the logged metrics: first episode
// reaching the environment's maximum return, mean return over all episodes,
// and transitions per second. Rows sort by mean return, best first.
inline std::vector<ComparisonRow> summarize(const std::vector<std::string>& dirs) {
  std::vector<ComparisonRow> rows;
  for (const auto& dir : dirs) {
    auto cfg = detail_report::read_snapshot(dir);
    auto md = detail_report::read_metrics(dir);
    ComparisonRow row;
    row.dir = dir;
    row.algo = cfg.algo;
    row.env = cfg.env;
    double max_ret = make_env(cfg.env, 0)->max_return();
    auto eps = detail_report::episode_series(md);
    for (const auto& p : eps) {
      row.mean_return += p.ret;
      if (p.ret >= max_ret && row.reached_episode < 0) row.reached_episode = p.episode;
    }
    row.episodes = static_cast<long>(eps.size());
    if (row.episodes > 0) row.mean_return /= row.episodes;
    if (!md.rows.empty()) {
      int c_step = md.col("env_step");
      int c_wall = md.col("wall_ms");
      double steps = std::stod(md.rows.back()[c_step]);
      double secs = std::stod(md.rows.back()[c_wall]) / 1000.0;
      if (secs > 0) row.fps = steps / secs;
    }
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(),
            [](const ComparisonRow& a, const ComparisonRow& b) {
              return a.mean_return > b.mean_return;
            });
  return rows;
}

inline std::string format_comparison(const std::vector<ComparisonRow>& rows) {
  char buf[256];
  std::string out = "run                                      reached   mean_return   fps\n";
  for (const auto& r : rows) {
    std::string reached = r.reached_episode >= 0 ? std::to_string(r.reached_episode) : "-";
    std::snprintf(buf, sizeof buf, "%-40s %-9s %-13.2f %.2f\n",
                  (r.algo + " (" + r.dir + ")").c_str(), reached.c_str(), r.mean_return, r.fps);
    out += buf;
  }
  return out;
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "run,algo,env,reached_episode,mean_return,fps\n";
  for (const auto& r : rows) {
    os << r.dir << "," << r.algo << "," << r.env << ","
       << (r.reached_episode >= 0 ? std::to_string(r.reached_episode) : "-") << ","
       << r.mean_return << "," << r.fps << "\n";
  }
}

// Moving-average training curves, indexed both by environment step and by
// wall-clock seconds. Window 1 passes the raw returns through.
inline void emit_curves(const std::vector<std::string>& dirs, int window) {
  if (window < 1) throw std::invalid_argument("emit_curves: window must be >= 1");
  for (const auto& dir : dirs) {
    auto md = detail_report::read_metrics(dir);
    auto eps = detail_report::episode_series(md);
    std::vector<double> smooth(eps.size());
    double acc = 0.0;
    for (size_t i = 0; i < eps.size(); ++i) {
      acc += eps[i].ret;
      if (i >= static_cast<size_t>(window)) acc -= eps[i - window].ret;
      smooth[i] = acc / std::min<size_t>(i + 1, window);
    }
    std::ofstream fs(dir + "/curve_step.csv");
    fs << "env_step,smoothed_return\n";
    for (size_t i = 0; i < eps.size(); ++i) fs << eps[i].env_step << "," << smooth[i] << "\n";
    std::ofstream fw(dir + "/curve_wall.csv");
    fw << "wall_s,smoothed_return\n";
    for (size_t i = 0; i < eps.size(); ++i) fw << eps[i].wall_s << "," << smooth[i] << "\n";
  }
}

}  // namespace rl
