#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crlprune/cost.hpp"
#include "crlprune/dataset.hpp"
#include "crlprune/network.hpp"
#include "crlprune/rng.hpp"

namespace crlprune {

using StateVec = std::vector<double>;

enum class RewardMode { neg_loss, accuracy };

RewardMode reward_mode_from_string(const std::string& s);
std::string to_string(RewardMode m);

struct EnvConfig {
  double alpha = 30.0;                         // budget, percent remaining
  int batch_size = 60;                         // |B| for fine-tune and reward batches
  std::vector<int> finetune_schedule = {0, 32, 128};
  double finetune_lr = 1e-3;
  RewardMode reward_mode = RewardMode::neg_loss;
  std::string cost = "param_fraction";
  double discount = 1.0;

  void validate() const;
};

struct StepResult {
  StateVec state;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
  double applied_action = 0.0;  // post-squash value the env acted on
};

// Fixed-horizon episodic interface. Transitions are deterministic: step t
// always moves to layer t+1; reward and cost are zero until the terminal
// step. clone() must yield an independent instance for rollout workers.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual StateVec reset(std::uint64_t episode_seed) = 0;
  virtual StepResult step(std::span<const double> action) = 0;
  virtual int state_dim() const = 0;
  virtual int horizon() const = 0;
  virtual void set_progress(double /*fraction*/) {}
  virtual std::unique_ptr<Environment> clone() const = 0;
};

// Everything the terminal step produced, kept for delivery and logging.
struct EpisodeOutcome {
  std::vector<double> sparsities;
  Masks masks;
  int finetune_iterations = 0;
  double reward = 0.0;  // raw
  double cost = 0.0;    // raw
  std::shared_ptr<Network> pruned_net;
};

// Walks the policy across the conv layers of a frozen pretrained network.
// The terminal step builds magnitude masks from the recorded sparsities,
// fine-tunes a copy and reports -loss (or accuracy) and the budget cost.
class PruneEnv : public Environment {
 public:
  PruneEnv(std::shared_ptr<const Network> pretrained, std::shared_ptr<const Dataset> train_data,
           EnvConfig cfg);

  StateVec reset(std::uint64_t episode_seed) override;
  StepResult step(std::span<const double> action) override;
  int state_dim() const override { return 6; }
  int horizon() const override { return static_cast<int>(pretrained_->conv_layers().size()); }
  void set_progress(double fraction) override;
  std::unique_ptr<Environment> clone() const override;

  // raw gaussian sample -> sparsity ratio
  static double squash_action(double a);

  const EpisodeOutcome& last_outcome() const;
  int finetune_iterations_for_progress() const;
  StateVec state_for_layer(int t) const;  // 1-based, exposed for tests

 private:
  std::shared_ptr<const Network> pretrained_;
  std::shared_ptr<const Dataset> data_;
  EnvConfig cfg_;
  CostFunction cost_fn_;
  std::vector<double> feature_max_;

  int step_index_ = 0;  // 0 = needs reset; else next layer to act on (1-based)
  std::vector<double> sparsities_;
  std::optional<Rng> episode_rng_;
  double progress_ = 0.0;
  std::optional<EpisodeOutcome> last_;
};

}  // namespace crlprune
