#pragma once

#include <memory>
#include <string>

#include "rl/cartpole.hpp"
#include "rl/tabular_mdp.hpp"

namespace rl {

// Parses environment ids of the form "cartpole", "chain5", "gridworld4x4",
// "cliff".
inline std::unique_ptr<Env> make_env(const std::string& id, uint64_t seed) {
  if (id == "cartpole") return std::make_unique<CartPoleEnv>(seed);
  if (id == "cliff") return std::make_unique<TabularEnv>(cliff_mdp(), seed);
  if (id.rfind("chain", 0) == 0) {
    int n = std::stoi(id.substr(5));
    return std::make_unique<TabularEnv>(chain_mdp(n), seed);
  }
  if (id.rfind("gridworld", 0) == 0) {
    auto rest = id.substr(9);
    auto x = rest.find('x');
    if (x == std::string::npos) throw std::invalid_argument("make_env: expected gridworldWxH");
    int w = std::stoi(rest.substr(0, x));
    int h = std::stoi(rest.substr(x + 1));
    return std::make_unique<TabularEnv>(gridworld_mdp(w, h), seed);
  }
  throw std::invalid_argument("make_env: unknown environment id '" + id + "'");
}

}  // namespace rl
