#include "crlprune/rollout.hpp"

#include <mutex>
#include <stdexcept>
#include <thread>

namespace crlprune {

std::size_t RolloutBuffer::transition_count() const {
  std::size_t n = 0;
  for (const EpisodeRecord& e : episodes) n += e.steps.size();
  return n;
}

std::vector<const Transition*> RolloutBuffer::flat() const {
  std::vector<const Transition*> out;
  for (const EpisodeRecord& e : episodes) {
    for (const Transition& t : e.steps) out.push_back(&t);
  }
  return out;
}

std::vector<Transition*> RolloutBuffer::flat() {
  std::vector<Transition*> out;
  for (EpisodeRecord& e : episodes) {
    for (Transition& t : e.steps) out.push_back(&t);
  }
  return out;
}

double RolloutBuffer::mean_raw_terminal_reward() const {
  double sum = 0.0;
  for (const EpisodeRecord& e : episodes) sum += e.steps.back().raw_reward;
  return sum / static_cast<double>(episodes.size());
}

double RolloutBuffer::mean_raw_terminal_cost() const {
  double sum = 0.0;
  for (const EpisodeRecord& e : episodes) sum += e.steps.back().raw_cost;
  return sum / static_cast<double>(episodes.size());
}

double RolloutBuffer::mean_applied_action() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const EpisodeRecord& e : episodes) {
    for (const Transition& t : e.steps) {
      sum += t.applied_action;
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

namespace {

EpisodeRecord run_episode(const GaussianPolicy& policy, Environment& env, Rng episode_rng) {
  Rng action_rng = episode_rng.split("actions");
  const std::uint64_t env_seed = episode_rng.split("env").next_u64();

  EpisodeRecord record;
  StateVec state = env.reset(env_seed);
  for (;;) {
    Transition tr;
    tr.state = state;
    GaussianPolicy::Sample sample = policy.sample(state, action_rng);
    tr.action = sample.action;
    tr.behavior_log_prob = sample.log_prob;
    StepResult res = env.step(tr.action);
    tr.next_state = res.state;
    tr.raw_reward = res.reward;
    tr.raw_cost = res.cost;
    tr.done = res.done;
    tr.applied_action = res.applied_action;
    state = res.state;
    record.steps.push_back(std::move(tr));
    if (res.done) break;
  }
  return record;
}

}  // namespace

RolloutBuffer collect_rollouts(const GaussianPolicy& policy, Environment& env, int episode_count,
                               RunningStat& reward_stat, RunningStat& cost_stat, Rng& rng,
                               int workers, bool normalize) {
  if (episode_count < 1) throw std::invalid_argument("episode_count must be >= 1");
  if (workers < 1) workers = 1;
  if (workers > episode_count) workers = episode_count;

  std::vector<Rng> episode_rngs;
  episode_rngs.reserve(static_cast<std::size_t>(episode_count));
  for (int e = 0; e < episode_count; ++e) {
    episode_rngs.push_back(rng.split(static_cast<std::uint64_t>(e)));
  }
  rng.next_u64();  // advance so the next iteration derives fresh streams

  RolloutBuffer buffer;
  buffer.episodes.resize(static_cast<std::size_t>(episode_count));

  if (workers == 1) {
    for (int e = 0; e < episode_count; ++e) {
      buffer.episodes[static_cast<std::size_t>(e)] =
          run_episode(policy, env, episode_rngs[static_cast<std::size_t>(e)]);
    }
  } else {
    // clone() carries the prototype's schedule progress into each worker
    std::vector<std::unique_ptr<Environment>> envs;
    for (int w = 0; w < workers; ++w) envs.push_back(env.clone());
    std::vector<std::thread> threads;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&, w]() {
        try {
          for (int e = w; e < episode_count; e += workers) {
            buffer.episodes[static_cast<std::size_t>(e)] =
                run_episode(policy, *envs[static_cast<std::size_t>(w)],
                            episode_rngs[static_cast<std::size_t>(e)]);
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
    for (std::thread& t : threads) t.join();
    if (error) std::rethrow_exception(error);
  }

  // fold terminal signals into the running stats in episode order
  for (EpisodeRecord& e : buffer.episodes) {
    Transition& last = e.steps.back();
    if (normalize) {
      last.reward = update_and_normalize(reward_stat, last.raw_reward);
      last.cost = update_and_normalize(cost_stat, last.raw_cost);
    } else {
      last.reward = last.raw_reward;
      last.cost = last.raw_cost;
    }
  }
  return buffer;
}

}  // namespace crlprune
