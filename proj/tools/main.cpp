#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crlprune/checkpoint.hpp"
#include "crlprune/experiment.hpp"

namespace {

using crlprune::ExperimentConfig;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> cost;
  std::optional<int> workers;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config file (JSON)");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--alpha", flags.alpha, "budget, percent remaining");
  cmd->add_option("--cost", flags.cost,
                  "cost function: param_fraction, flops_fraction or external:CMD");
  cmd->add_option("--workers", flags.workers, "rollout worker threads");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) cfg = ExperimentConfig::load(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.alpha) cfg.env.alpha = *flags.alpha;
  if (flags.cost) cfg.env.cost = *flags.cost;
  if (flags.workers) cfg.workers = *flags.workers;
  if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
  cfg.validate();
  return cfg;
}

int print_report(const std::vector<std::string>& dirs) {
  for (const std::string& dir : dirs) {
    const std::filesystem::path path = std::filesystem::path(dir) / "summary.json";
    std::ifstream in(path);
    if (!in) {
      std::cerr << "error: cannot open " << path << "\n";
      return 1;
    }
    nlohmann::json j;
    in >> j;
    std::cout << dir << ":\n";
    const std::string command = j.value("command", "?");
    std::cout << "  command:   " << command << "\n";
    if (j.contains("sparsity_percent")) {
      std::cout << "  sparsity:  " << j["sparsity_percent"].get<double>() << " %\n";
    }
    if (j.contains("final_cost")) {
      std::cout << "  cost:      " << j["final_cost"].get<double>() << " (alpha "
                << j.value("alpha", 0.0) << ")\n";
    }
    if (j.contains("pruned_test_accuracy")) {
      std::cout << "  accuracy:  " << j["pruned_test_accuracy"].get<double>() << " (unpruned "
                << j.value("unpruned_test_accuracy", 0.0)
                << ", delta " << j.value("delta_accuracy", 0.0) << ")\n";
    }
    if (j.contains("train_accuracy")) {
      std::cout << "  train acc: " << j["train_accuracy"].get<double>() << "\n";
      std::cout << "  test acc:  " << j["test_accuracy"].get<double>() << "\n";
    }
    if (j.contains("lambda_final")) {
      std::cout << "  lambda:    " << j["lambda_final"].get<double>() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"budget-constrained network pruning via PPO-Lagrangian"};
  app.require_subcommand(1);

  CommonFlags pretrain_flags;
  CLI::App* pretrain = app.add_subcommand("pretrain", "train the target network from scratch");
  add_common_flags(pretrain, pretrain_flags);

  CommonFlags prune_flags;
  std::string prune_checkpoint;
  CLI::App* prune = app.add_subcommand("prune", "run constrained-RL pruning on a checkpoint");
  add_common_flags(prune, prune_flags);
  prune->add_option("--checkpoint", prune_checkpoint, "pretrained checkpoint JSON")->required();

  CommonFlags baseline_flags;
  std::string baseline_checkpoint;
  double baseline_ratio = -1.0;
  std::string match_dir;
  CLI::App* baseline =
      app.add_subcommand("baseline", "uniform magnitude pruning at a fixed ratio");
  add_common_flags(baseline, baseline_flags);
  baseline->add_option("--checkpoint", baseline_checkpoint, "pretrained checkpoint JSON")
      ->required();
  baseline->add_option("--ratio", baseline_ratio, "per-layer sparsity ratio in [0, 1)");
  baseline->add_option("--match", match_dir,
                       "prune-run directory whose total sparsity the baseline should match");

  std::vector<std::string> report_dirs;
  CLI::App* report = app.add_subcommand("report", "print run summaries");
  report->add_option("dirs", report_dirs, "run output directories")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed()) {
      const ExperimentConfig cfg = resolve_config(pretrain_flags);
      crlprune::run_pretrain(cfg, &std::cout);
      return 0;
    }
    if (prune->parsed()) {
      const ExperimentConfig cfg = resolve_config(prune_flags);
      auto net = std::make_shared<crlprune::Network>(crlprune::load_network(prune_checkpoint));
      const crlprune::PruneOutcome out = crlprune::run_prune(cfg, net, &std::cout);
      return out.budget_satisfied ? 0 : 2;
    }
    if (baseline->parsed()) {
      const ExperimentConfig cfg = resolve_config(baseline_flags);
      auto net = std::make_shared<crlprune::Network>(crlprune::load_network(baseline_checkpoint));
      double ratio = baseline_ratio;
      if (!match_dir.empty()) {
        std::ifstream in(std::filesystem::path(match_dir) / "summary.json");
        if (!in) throw std::runtime_error("cannot open summary.json under " + match_dir);
        nlohmann::json j;
        in >> j;
        const double target = j.at("remaining_param_percent").get<double>();
        ratio = crlprune::uniform_ratio_for_target(*net, target);
        std::cout << "matched ratio " << ratio << " for remaining " << target << "%\n";
      }
      if (ratio < 0.0) {
        throw std::runtime_error("baseline needs --ratio or --match");
      }
      crlprune::run_baseline(cfg, net, ratio, &std::cout);
      return 0;
    }
    if (report->parsed()) {
      return print_report(report_dirs);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
