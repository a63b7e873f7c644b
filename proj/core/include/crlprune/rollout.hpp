#pragma once

#include <vector>

#include "crlprune/environment.hpp"
#include "crlprune/policy.hpp"
#include "crlprune/running_stat.hpp"

namespace crlprune {

struct Transition {
  StateVec state;
  std::vector<double> action;  // raw, pre-squash
  StateVec next_state;
  double reward = 0.0;  // normalized terminal reward, 0 elsewhere
  double cost = 0.0;    // normalized terminal cost, 0 elsewhere
  double raw_reward = 0.0;
  double raw_cost = 0.0;
  bool done = false;
  double applied_action = 0.0;
  double behavior_log_prob = 0.0;
  // filled by compute_advantages
  double advantage_reward = 0.0;  // J^r
  double advantage_cost = 0.0;    // J^c
};

struct EpisodeRecord {
  std::vector<Transition> steps;
};

struct RolloutBuffer {
  std::vector<EpisodeRecord> episodes;

  std::size_t transition_count() const;
  std::vector<const Transition*> flat() const;
  std::vector<Transition*> flat();
  double mean_raw_terminal_reward() const;
  double mean_raw_terminal_cost() const;
  double mean_applied_action() const;
};

// Runs episode_count complete episodes, fanned out over `workers` cloned
// environments. Episode seeds derive from rng alone, and signal statistics
// are folded in afterwards in episode order, so the result is identical for
// any worker count. Terminal rewards/costs pass through the running stats
// when normalize is set; zeros at non-terminal steps stay zero.
RolloutBuffer collect_rollouts(const GaussianPolicy& policy, Environment& env, int episode_count,
                               RunningStat& reward_stat, RunningStat& cost_stat, Rng& rng,
                               int workers = 1, bool normalize = true);

}  // namespace crlprune
