#include "crlprune/ppo_lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace crlprune {

void PpoConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("clip must lie in (0, 1)");
  if (lr_policy <= 0.0 || lr_value_r <= 0.0 || lr_value_c <= 0.0) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (minibatch < 0) throw std::invalid_argument("minibatch must be >= 0");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (episodes_per_iteration < 1) {
    throw std::invalid_argument("episodes_per_iteration must be >= 1");
  }
  if (!(discount > 0.0 && discount <= 1.0)) {
    throw std::invalid_argument("discount must lie in (0, 1]");
  }
  if (gamma_r < 0.0 || gamma_c < 0.0) throw std::invalid_argument("TD discounts must be >= 0");
}

void compute_advantages(RolloutBuffer& buffer, const ValueNet& value_r, const ValueNet& value_c,
                        const PpoConfig& cfg) {
  for (EpisodeRecord& episode : buffer.episodes) {
    double reward_to_go = 0.0;
    double cost_to_go = 0.0;
    for (std::size_t i = episode.steps.size(); i-- > 0;) {
      Transition& tr = episode.steps[i];
      reward_to_go = tr.reward + cfg.discount * reward_to_go;
      cost_to_go = tr.cost + cfg.discount * cost_to_go;
      double baseline_r;
      double baseline_c;
      if (cfg.baseline_on_next_state) {
        // as specified: V(s_{t+1}), with V after the terminal step == 0
        baseline_r = tr.done ? 0.0 : value_r.predict(tr.next_state);
        baseline_c = tr.done ? 0.0 : value_c.predict(tr.next_state);
      } else {
        baseline_r = value_r.predict(tr.state);
        baseline_c = value_c.predict(tr.state);
      }
      tr.advantage_reward = reward_to_go - baseline_r;
      tr.advantage_cost = cost_to_go - baseline_c;
    }
  }
}

ObjectiveParts ppo_lagrangian_objective(const std::vector<const Transition*>& batch,
                                        const GaussianPolicy& policy, const LagrangeState& lag,
                                        const PpoConfig& cfg, double alpha_norm,
                                        PolicyGrad* grad) {
  if (batch.empty()) throw std::invalid_argument("objective needs a non-empty batch");
  const double m = static_cast<double>(batch.size());
  const double lo = 1.0 - cfg.clip;
  const double hi = 1.0 + cfg.clip;

  double surrogate = 0.0;
  double cost_mean = 0.0;

  for (const Transition* tr : batch) {
    double d_loss_d_rho = 0.0;

    // ratio under the current policy vs the behavior policy
    const double lp_now = policy.log_prob(tr->state, tr->action);
    const double rho = std::exp(lp_now - tr->behavior_log_prob);
    if (!std::isfinite(rho)) {
      throw std::runtime_error("ppo objective: non-finite likelihood ratio");
    }

    const double unclipped = rho * tr->advantage_reward;
    const double clipped = std::clamp(rho, lo, hi) * tr->advantage_reward;
    if (unclipped <= clipped) {
      surrogate += unclipped;
      d_loss_d_rho -= tr->advantage_reward / m;
    } else {
      surrogate += clipped;
      // gradient is zero where the clip saturates
      if (rho > lo && rho < hi) d_loss_d_rho -= tr->advantage_reward / m;
    }

    cost_mean += rho * tr->advantage_cost;
    d_loss_d_rho += lag.lambda * tr->advantage_cost / m;

    if (grad) {
      const double d_loss_d_logp = d_loss_d_rho * rho;
      if (d_loss_d_logp != 0.0) {
        policy.log_prob_with_grad(tr->state, tr->action, d_loss_d_logp, *grad);
      }
    }
  }

  ObjectiveParts parts;
  parts.reward_surrogate = surrogate / m;
  parts.cost_term = cost_mean / m - alpha_norm;
  parts.total = parts.reward_surrogate - lag.lambda * parts.cost_term;
  return parts;
}

ObjectiveParts update_policy(GaussianPolicy& policy, PolicyOptimizer& opt,
                             const RolloutBuffer& buffer, const LagrangeState& lag,
                             const PpoConfig& cfg, double alpha_norm, Rng& rng) {
  const std::vector<const Transition*> all = const_cast<const RolloutBuffer&>(buffer).flat();
  const std::size_t n = all.size();
  const std::size_t mb =
      (cfg.minibatch <= 0 || static_cast<std::size_t>(cfg.minibatch) >= n)
          ? n
          : static_cast<std::size_t>(cfg.minibatch);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (mb < n) {
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_index(i + 1)]);
    }
  }

  ObjectiveParts last;
  PolicyGrad grad = policy.make_grad();
  for (std::size_t start = 0; start < n; start += mb) {
    const std::size_t end = std::min(start + mb, n);
    std::vector<const Transition*> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) batch.push_back(all[order[i]]);
    grad.zero();
    last = ppo_lagrangian_objective(batch, policy, lag, cfg, alpha_norm, &grad);
    opt.step(policy, grad, cfg.lr_policy);
  }
  return last;
}

void update_lambda(LagrangeState& lag, const RolloutBuffer& buffer) {
  const double residual = buffer.mean_raw_terminal_cost() - lag.alpha;
  lag.lambda = std::max(0.0, lag.lambda + lag.lr * residual);
}

double value_loss_with_grad(const ValueNet& vnet, const RolloutBuffer& buffer, bool use_cost,
                            double td_discount, std::vector<Tensor>* grad) {
  double loss = 0.0;
  for (const EpisodeRecord& episode : buffer.episodes) {
    for (const Transition& tr : episode.steps) {
      const double signal = use_cost ? tr.cost : tr.reward;
      const double v_now = vnet.predict(tr.state);
      const double v_next = tr.done ? 0.0 : vnet.predict(tr.next_state);
      const double err = signal + td_discount * v_next - v_now;
      loss += err * err;
      if (grad) {
        // both value terms are differentiated
        vnet.predict_with_grad(tr.state, -2.0 * err, *grad);
        if (!tr.done) vnet.predict_with_grad(tr.next_state, 2.0 * td_discount * err, *grad);
      }
    }
  }
  return loss;
}

std::pair<double, double> update_value_nets(ValueNet& value_r, ValueNet& value_c,
                                            MlpOptimizer& opt_r, MlpOptimizer& opt_c,
                                            const RolloutBuffer& buffer, const PpoConfig& cfg) {
  std::vector<Tensor> grad_r = value_r.net().make_grad();
  const double loss_r = value_loss_with_grad(value_r, buffer, false, cfg.gamma_r, &grad_r);
  opt_r.step(value_r.net(), grad_r, cfg.lr_value_r);

  std::vector<Tensor> grad_c = value_c.net().make_grad();
  const double loss_c = value_loss_with_grad(value_c, buffer, true, cfg.gamma_c, &grad_c);
  opt_c.step(value_c.net(), grad_c, cfg.lr_value_c);

  return {loss_r, loss_c};
}

TrainReport train(const PpoConfig& cfg, Environment& env, GaussianPolicy& policy,
                  ValueNet& value_r, ValueNet& value_c, LagrangeState& lag, Rng& rng,
                  int workers, std::ostream* progress) {
  cfg.validate();
  PolicyOptimizer policy_opt(policy);
  MlpOptimizer opt_r(value_r.net());
  MlpOptimizer opt_c(value_c.net());
  RunningStat reward_stat;
  RunningStat cost_stat;
  Rng collect_rng = rng.split("collect");
  Rng shuffle_rng = rng.split("minibatch");

  TrainReport report;
  int episode_counter = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    env.set_progress(static_cast<double>(it) / static_cast<double>(cfg.iterations));
    Rng iter_rng = collect_rng.split(static_cast<std::uint64_t>(it));
    const double lambda_at_collect = lag.lambda;

    RolloutBuffer buffer;
    try {
      buffer = collect_rollouts(policy, env, cfg.episodes_per_iteration, reward_stat, cost_stat,
                                iter_rng, workers, cfg.normalize_signals);
      compute_advantages(buffer, value_r, value_c, cfg);

      const double alpha_norm = (cfg.normalize_signals && cost_stat.count >= 2)
                                    ? cost_stat.normalize(lag.alpha)
                                    : lag.alpha;
      for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        update_policy(policy, policy_opt, buffer, lag, cfg, alpha_norm, shuffle_rng);
      }
      update_lambda(lag, buffer);
      for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        update_value_nets(value_r, value_c, opt_r, opt_c, buffer, cfg);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("training iteration " + std::to_string(it + 1) + ": " + e.what());
    }

    for (const EpisodeRecord& episode : buffer.episodes) {
      for (std::size_t s = 0; s < episode.steps.size(); ++s) {
        const Transition& tr = episode.steps[s];
        report.episode_rows.push_back(EpisodeLogRow{episode_counter, static_cast<int>(s + 1),
                                                    tr.action[0], tr.applied_action,
                                                    tr.raw_reward, tr.raw_cost,
                                                    lambda_at_collect});
      }
      ++episode_counter;
    }

    IterationLog row;
    row.iteration = it + 1;
    row.mean_reward = buffer.mean_raw_terminal_reward();
    row.mean_cost = buffer.mean_raw_terminal_cost();
    row.lambda = lag.lambda;
    row.mean_sparsity = buffer.mean_applied_action();
    report.iterations.push_back(row);

    if (progress && ((it + 1) % 10 == 0 || it + 1 == cfg.iterations)) {
      (*progress) << "iter " << row.iteration << "  reward " << row.mean_reward << "  cost "
                  << row.mean_cost << "  lambda " << row.lambda << "  sparsity "
                  << row.mean_sparsity << "\n";
    }
  }

  // deterministic delivery episode: act with the policy mean
  env.set_progress(1.0);
  const std::uint64_t greedy_seed = rng.split("greedy-episode").next_u64();
  StateVec state = env.reset(greedy_seed);
  for (;;) {
    const std::vector<double> action = policy.mean(state);
    report.final_actions.push_back(action[0]);
    StepResult res = env.step(action);
    report.final_sparsities.push_back(res.applied_action);
    if (res.done) {
      report.final_reward = res.reward;
      report.final_cost = res.cost;
      break;
    }
    state = res.state;
  }
  report.final_lambda = lag.lambda;
  return report;
}

}  // namespace crlprune
