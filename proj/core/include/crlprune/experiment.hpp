#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crlprune/dataset.hpp"
#include "crlprune/environment.hpp"
#include "crlprune/network.hpp"
#include "crlprune/ppo_lagrangian.hpp"

namespace crlprune {

struct DatasetSpec {
  std::string type = "synthetic";  // or "binary"
  SyntheticSpec synthetic;
  std::string path;  // binary file, CIFAR-style records
};

struct NetworkSpec {
  std::vector<ConvSpec> conv = {{8, 3, 1, 0}, {16, 3, 1, 0}, {16, 3, 1, 0}};
  std::vector<int> hidden;  // dense layers before the classifier output
};

struct PretrainSpec {
  int steps = 300;
  double lr = 3e-3;
  int batch_size = 60;
};

struct PolicySpec {
  std::vector<int> hidden = {64, 64};
  double initial_sigma = 0.5;
};

struct LagrangeSpec {
  double lambda_init = 1.0;
  double lr = 3e-4;
};

// Everything a run needs; serialized verbatim as config.json so outputs are
// a pure function of this struct.
struct ExperimentConfig {
  int format_version = 1;
  std::uint64_t seed = 1;
  std::string output_dir = "runs/out";
  int workers = 1;
  DatasetSpec dataset;
  NetworkSpec network;
  PretrainSpec pretrain;
  PolicySpec policy;
  LagrangeSpec lagrange;
  EnvConfig env;
  PpoConfig ppo;

  std::string to_json_string() const;
  static ExperimentConfig from_json_string(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
  void validate() const;
};

Dataset build_dataset(const ExperimentConfig& cfg, bool train);

struct PretrainOutcome {
  std::shared_ptr<Network> net;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// trains the target network from scratch; writes checkpoint.json,
// config.json and summary.json under cfg.output_dir
PretrainOutcome run_pretrain(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct PruneOutcome {
  Masks masks;
  std::vector<double> sparsities;
  double final_cost = 0.0;
  double remaining_param_percent = 0.0;
  double sparsity_percent = 0.0;
  double unpruned_accuracy = 0.0;
  double pruned_accuracy = 0.0;
  double delta_accuracy = 0.0;
  double lambda_final = 0.0;
  bool budget_satisfied = false;
  TrainReport report;
};

// runs the constrained-RL pruning loop against a pretrained checkpoint;
// writes config.json, iterations.csv, episodes.csv, masks.json,
// checkpoint.json (pruned + fine-tuned), agent.json and summary.json
PruneOutcome run_prune(const ExperimentConfig& cfg, std::shared_ptr<const Network> pretrained,
                       std::ostream* log = nullptr);

struct BaselineOutcome {
  double ratio = 0.0;
  Masks masks;
  double remaining_param_percent = 0.0;
  double sparsity_percent = 0.0;
  double unpruned_accuracy = 0.0;
  double pruned_accuracy = 0.0;
  double delta_accuracy = 0.0;
};

// uniform per-layer magnitude pruning at `ratio`, fine-tuned with the same
// budget as a delivered CRL episode (last schedule entry)
BaselineOutcome run_baseline(const ExperimentConfig& cfg,
                             std::shared_ptr<const Network> pretrained, double ratio,
                             std::ostream* log = nullptr);

// uniform ratio whose remaining-parameter percent comes closest to target
double uniform_ratio_for_target(const Network& net, double target_remaining_percent);

void write_iterations_csv(const std::vector<IterationLog>& rows, const std::string& path);
void write_episodes_csv(const std::vector<EpisodeLogRow>& rows, const std::string& path);

}  // namespace crlprune
