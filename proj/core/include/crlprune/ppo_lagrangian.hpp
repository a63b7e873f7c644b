#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "crlprune/policy.hpp"
#include "crlprune/rollout.hpp"

namespace crlprune {

struct PpoConfig {
  double clip = 0.2;
  double lr_policy = 3e-4;   // eta_1
  double lr_value_r = 3e-4;  // eta_3
  double lr_value_c = 3e-4;  // eta_4
  int epochs = 10;           // passes over the buffer per iteration
  int minibatch = 0;         // transitions per update; 0 = whole buffer
  int iterations = 45;
  int episodes_per_iteration = 8;
  double discount = 1.0;  // reward/cost-to-go discount inside the advantages
  double gamma_r = 0.99;  // TD discount of the reward value net
  double gamma_c = 1.00;  // TD discount of the cost value net
  bool normalize_signals = true;
  bool baseline_on_next_state = true;  // false: conventional V(s_t) baseline

  void validate() const;
};

struct LagrangeState {
  double lambda = 1.0;
  double alpha = 30.0;  // budget, same units as the raw cost
  double lr = 3e-4;     // eta_2
};

// Fills advantage_reward / advantage_cost on every transition:
// J = signal-to-go from t minus the value baseline, with a zero bootstrap
// at the terminal step.
void compute_advantages(RolloutBuffer& buffer, const ValueNet& value_r, const ValueNet& value_c,
                        const PpoConfig& cfg);

struct ObjectiveParts {
  double total = 0.0;             // reward_surrogate - lambda * cost_term
  double reward_surrogate = 0.0;  // mean of min(rho*Jr, clip(rho)*Jr)
  double cost_term = 0.0;         // mean(rho*Jc) - alpha_norm
};

// Clipped Lagrangian objective over one batch of transitions. When grad is
// non-null, accumulates d(-objective)/d(policy params) so a descent step on
// the result ascends the objective. Throws if any likelihood ratio is
// non-finite.
ObjectiveParts ppo_lagrangian_objective(const std::vector<const Transition*>& batch,
                                        const GaussianPolicy& policy, const LagrangeState& lag,
                                        const PpoConfig& cfg, double alpha_norm,
                                        PolicyGrad* grad);

// One pass over the buffer (whole-buffer batch or shuffled minibatches),
// stepping the optimizer after each batch. Returns the objective of the
// last batch evaluated.
ObjectiveParts update_policy(GaussianPolicy& policy, PolicyOptimizer& opt,
                             const RolloutBuffer& buffer, const LagrangeState& lag,
                             const PpoConfig& cfg, double alpha_norm, Rng& rng);

// lambda <- max(0, lambda + lr * (mean raw terminal cost - alpha));
// dual ascent on the constraint residual, in raw cost units
void update_lambda(LagrangeState& lag, const RolloutBuffer& buffer);

// Sum-of-squares TD losses; the full residual is differentiated, including
// the bootstrap term. Returns the value-loss pair before the update.
std::pair<double, double> update_value_nets(ValueNet& value_r, ValueNet& value_c,
                                            MlpOptimizer& opt_r, MlpOptimizer& opt_c,
                                            const RolloutBuffer& buffer, const PpoConfig& cfg);

// loss + gradient for one value net against reward (use_cost=false) or cost
// signals; exposed for gradient checks
double value_loss_with_grad(const ValueNet& vnet, const RolloutBuffer& buffer, bool use_cost,
                            double td_discount, std::vector<Tensor>* grad);

struct IterationLog {
  int iteration = 0;
  double mean_reward = 0.0;  // raw terminal reward, mean over episodes
  double mean_cost = 0.0;    // raw terminal cost, mean over episodes
  double lambda = 0.0;       // after this iteration's dual update
  double mean_sparsity = 0.0;
};

struct EpisodeLogRow {
  int episode = 0;
  int layer = 0;
  double action = 0.0;    // raw policy output
  double sparsity = 0.0;  // applied (squashed) value
  double reward = 0.0;    // raw
  double cost = 0.0;      // raw
  double lambda = 0.0;    // at collection time
};

struct TrainReport {
  std::vector<IterationLog> iterations;
  std::vector<EpisodeLogRow> episode_rows;
  // greedy (mean-action) episode run after the last iteration
  std::vector<double> final_actions;
  std::vector<double> final_sparsities;
  double final_reward = 0.0;
  double final_cost = 0.0;
  double final_lambda = 0.0;
};

// The full loop: collect, estimate advantages, policy epochs, dual update,
// value updates; then one greedy episode with the mean action.
TrainReport train(const PpoConfig& cfg, Environment& env, GaussianPolicy& policy,
                  ValueNet& value_r, ValueNet& value_c, LagrangeState& lag, Rng& rng,
                  int workers = 1, std::ostream* progress = nullptr);

}  // namespace crlprune
