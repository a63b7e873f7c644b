#include "crlprune/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crlprune/pruning.hpp"

namespace crlprune {

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "neg_loss") return RewardMode::neg_loss;
  if (s == "accuracy") return RewardMode::accuracy;
  throw std::invalid_argument("unknown reward mode: " + s);
}

std::string to_string(RewardMode m) {
  return m == RewardMode::neg_loss ? "neg_loss" : "accuracy";
}

void EnvConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 100.0)) {
    throw std::invalid_argument("alpha must lie in (0, 100]");
  }
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (finetune_schedule.empty()) {
    throw std::invalid_argument("finetune_schedule must not be empty");
  }
  for (std::size_t i = 0; i < finetune_schedule.size(); ++i) {
    if (finetune_schedule[i] < 0) {
      throw std::invalid_argument("finetune_schedule entries must be non-negative");
    }
    if (i > 0 && finetune_schedule[i] < finetune_schedule[i - 1]) {
      throw std::invalid_argument("finetune_schedule must be non-decreasing");
    }
  }
  if (finetune_lr <= 0.0) throw std::invalid_argument("finetune_lr must be positive");
  if (discount <= 0.0 || discount > 1.0) {
    throw std::invalid_argument("discount must lie in (0, 1]");
  }
}

PruneEnv::PruneEnv(std::shared_ptr<const Network> pretrained,
                   std::shared_ptr<const Dataset> train_data, EnvConfig cfg)
    : pretrained_(std::move(pretrained)),
      data_(std::move(train_data)),
      cfg_(std::move(cfg)),
      cost_fn_(CostFunction::parse(cfg_.cost)) {
  cfg_.validate();
  if (!pretrained_ || pretrained_->conv_layers().empty()) {
    throw std::invalid_argument("prune environment needs a pretrained network");
  }
  if (!data_ || data_->size() == 0) {
    throw std::invalid_argument("prune environment needs a non-empty training set");
  }
  // fixed per-feature scale: divide by the largest attribute value in the net
  feature_max_.assign(6, 1.0);
  for (const ConvLayer& l : pretrained_->conv_layers()) {
    const double f[6] = {static_cast<double>(l.spec.index),
                         static_cast<double>(l.spec.in_channels),
                         static_cast<double>(l.spec.num_filters),
                         static_cast<double>(l.spec.kernel_size),
                         static_cast<double>(l.spec.stride),
                         static_cast<double>(l.spec.padding)};
    for (int i = 0; i < 6; ++i) feature_max_[i] = std::max(feature_max_[i], f[i]);
  }
}

StateVec PruneEnv::state_for_layer(int t) const {
  const ConvLayer& l = pretrained_->conv_layers()[static_cast<std::size_t>(t - 1)];
  StateVec s{static_cast<double>(l.spec.index),      static_cast<double>(l.spec.in_channels),
             static_cast<double>(l.spec.num_filters), static_cast<double>(l.spec.kernel_size),
             static_cast<double>(l.spec.stride),      static_cast<double>(l.spec.padding)};
  for (int i = 0; i < 6; ++i) s[static_cast<std::size_t>(i)] /= feature_max_[static_cast<std::size_t>(i)];
  return s;
}

StateVec PruneEnv::reset(std::uint64_t episode_seed) {
  step_index_ = 1;
  sparsities_.clear();
  episode_rng_ = Rng(episode_seed).split("prune-env");
  return state_for_layer(1);
}

double PruneEnv::squash_action(double a) { return std::clamp(a, 0.0, 0.95); }

void PruneEnv::set_progress(double fraction) {
  progress_ = std::clamp(fraction, 0.0, 1.0);
}

int PruneEnv::finetune_iterations_for_progress() const {
  const auto phases = cfg_.finetune_schedule.size();
  auto phase = static_cast<std::size_t>(progress_ * static_cast<double>(phases));
  if (phase >= phases) phase = phases - 1;
  return cfg_.finetune_schedule[phase];
}

StepResult PruneEnv::step(std::span<const double> action) {
  if (step_index_ == 0) throw std::logic_error("step() before reset() or after terminal step");
  if (action.empty()) throw std::invalid_argument("action must have at least one component");

  const int T = horizon();
  const double sparsity = squash_action(action[0]);
  sparsities_.push_back(sparsity);

  StepResult result;
  result.applied_action = sparsity;

  if (step_index_ < T) {
    ++step_index_;
    result.state = state_for_layer(step_index_);
    return result;
  }

  // terminal: build masks, fine-tune a copy, measure reward and cost
  EpisodeOutcome outcome;
  outcome.sparsities = sparsities_;
  const auto& convs = pretrained_->conv_layers();
  for (std::size_t t = 0; t < convs.size(); ++t) {
    outcome.masks.push_back(
        mask_from_sparsity(filter_norms(convs[t].weight), sparsities_[t]));
  }

  auto net = std::make_shared<Network>(*pretrained_);
  net->apply_mask(outcome.masks);

  outcome.finetune_iterations = finetune_iterations_for_progress();
  Rng& rng = *episode_rng_;
  if (outcome.finetune_iterations > 0) {
    NetOptimizer opt(*net);
    for (int it = 0; it < outcome.finetune_iterations; ++it) {
      std::vector<int> idx(static_cast<std::size_t>(cfg_.batch_size));
      for (int& i : idx) i = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(data_->size())));
      net->train_step(data_->gather_images(idx), data_->gather_labels(idx), opt,
                      cfg_.finetune_lr);
    }
  }

  // reward batch B, resampled uniformly each episode
  std::vector<int> batch_idx(static_cast<std::size_t>(cfg_.batch_size));
  for (int& i : batch_idx) {
    i = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(data_->size())));
  }
  const Tensor batch = data_->gather_images(batch_idx);
  const std::vector<int> batch_labels = data_->gather_labels(batch_idx);
  if (cfg_.reward_mode == RewardMode::neg_loss) {
    outcome.reward = -net->loss(batch, batch_labels);
  } else {
    outcome.reward = evaluate_accuracy(*net, batch, batch_labels);
  }
  outcome.cost = cost_fn_.evaluate(*net, outcome.masks, BatchSummary{cfg_.batch_size});
  outcome.pruned_net = net;

  result.state = StateVec(6, 0.0);
  result.reward = outcome.reward;
  result.cost = outcome.cost;
  result.done = true;

  last_ = std::move(outcome);
  step_index_ = 0;
  return result;
}

const EpisodeOutcome& PruneEnv::last_outcome() const {
  if (!last_) throw std::logic_error("no completed episode yet");
  return *last_;
}

std::unique_ptr<Environment> PruneEnv::clone() const {
  auto copy = std::make_unique<PruneEnv>(pretrained_, data_, cfg_);
  copy->set_progress(progress_);
  return copy;
}

}  // namespace crlprune
