#pragma once

// Umbrella header.

#include "rl/adam.hpp"
#include "rl/cartpole.hpp"
#include "rl/distribution.hpp"
#include "rl/env.hpp"
#include "rl/env_factory.hpp"
#include "rl/fisher_check.hpp"
#include "rl/losses.hpp"
#include "rl/mat.hpp"
#include "rl/network.hpp"
#include "rl/nstep.hpp"
#include "rl/param_store.hpp"
#include "rl/pg_agent.hpp"
#include "rl/reinforce.hpp"
#include "rl/replay_buffer.hpp"
#include "rl/report.hpp"
#include "rl/rng.hpp"
#include "rl/rollout.hpp"
#include "rl/run_config.hpp"
#include "rl/runner.hpp"
#include "rl/sum_tree.hpp"
#include "rl/tabular_dp.hpp"
#include "rl/tabular_mdp.hpp"
#include "rl/trpo.hpp"
#include "rl/value_agent.hpp"
