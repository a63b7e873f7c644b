#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "crlprune/experiment.hpp"
#include "crlprune/pruning.hpp"

using namespace crlprune;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("crlprune-exp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

ExperimentConfig quick_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.output_dir = out;
  cfg.dataset.synthetic.train_size = 64;
  cfg.dataset.synthetic.test_size = 32;
  cfg.pretrain.steps = 40;
  cfg.env.finetune_schedule = {0, 2, 4};
  cfg.ppo.iterations = 3;
  cfg.ppo.episodes_per_iteration = 2;
  cfg.ppo.epochs = 2;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("experiment config JSON round-trips") {
  ExperimentConfig cfg = quick_config("somewhere");
  cfg.seed = 99;
  cfg.env.alpha = 42.0;
  cfg.env.cost = "flops_fraction";
  cfg.ppo.minibatch = 12;

  const ExperimentConfig back = ExperimentConfig::from_json_string(cfg.to_json_string());
  CHECK(back.seed == 99);
  CHECK(back.env.alpha == 42.0);
  CHECK(back.env.cost == "flops_fraction");
  CHECK(back.ppo.minibatch == 12);
  CHECK(back.to_json_string() == cfg.to_json_string());
}

TEST_CASE("config parsing rejects garbage") {
  CHECK_THROWS(ExperimentConfig::from_json_string("not json"));
  CHECK_THROWS(ExperimentConfig::from_json_string(R"({"format_version": 2})"));
  CHECK_THROWS(ExperimentConfig::from_json_string(R"({"env": {"alpha": -3}})"));
  CHECK_THROWS(ExperimentConfig::from_json_string(R"({"env": {"cost": "nonsense"}})"));
}

TEST_CASE("pretrain then prune writes every declared output") {
  TempDir tmp;
  ExperimentConfig cfg = quick_config((tmp.path / "pre").string());
  const PretrainOutcome pre = run_pretrain(cfg);
  CHECK(pre.train_accuracy > 0.6);
  CHECK(std::filesystem::exists(tmp.path / "pre" / "checkpoint.json"));
  CHECK(std::filesystem::exists(tmp.path / "pre" / "config.json"));
  CHECK(std::filesystem::exists(tmp.path / "pre" / "summary.json"));

  cfg.output_dir = (tmp.path / "prune").string();
  cfg.env.alpha = 100.0;
  const PruneOutcome out = run_prune(cfg, pre.net);
  for (const char* name : {"config.json", "iterations.csv", "episodes.csv", "masks.json",
                           "checkpoint.json", "agent.json", "summary.json"}) {
    CHECK(std::filesystem::exists(tmp.path / "prune" / name));
  }

  // sparsity is definitionally 100 - remaining fraction of the masks
  CHECK(out.sparsity_percent ==
        doctest::Approx(100.0 - remaining_param_fraction(*pre.net, out.masks)).epsilon(1e-12));
  CHECK(out.budget_satisfied);  // alpha = 100 cannot be violated by param_fraction
  CHECK(out.final_cost <= 100.0);
}

TEST_CASE("prune outputs are a pure function of config and seed") {
  TempDir tmp;
  ExperimentConfig cfg = quick_config((tmp.path / "pre").string());
  const PretrainOutcome pre = run_pretrain(cfg);

  cfg.output_dir = (tmp.path / "a").string();
  run_prune(cfg, pre.net);
  cfg.output_dir = (tmp.path / "b").string();
  run_prune(cfg, pre.net);

  CHECK(slurp(tmp.path / "a" / "iterations.csv") == slurp(tmp.path / "b" / "iterations.csv"));
  CHECK(slurp(tmp.path / "a" / "episodes.csv") == slurp(tmp.path / "b" / "episodes.csv"));
  CHECK(slurp(tmp.path / "a" / "masks.json") == slurp(tmp.path / "b" / "masks.json"));
  CHECK(slurp(tmp.path / "a" / "checkpoint.json") == slurp(tmp.path / "b" / "checkpoint.json"));
}

TEST_CASE("worker fan-out does not change prune results") {
  TempDir tmp;
  ExperimentConfig cfg = quick_config((tmp.path / "pre").string());
  const PretrainOutcome pre = run_pretrain(cfg);

  cfg.output_dir = (tmp.path / "w1").string();
  cfg.workers = 1;
  run_prune(cfg, pre.net);
  cfg.output_dir = (tmp.path / "w2").string();
  cfg.workers = 2;
  run_prune(cfg, pre.net);

  // the worker count lives in config.json but every data artifact matches
  CHECK(slurp(tmp.path / "w1" / "iterations.csv") == slurp(tmp.path / "w2" / "iterations.csv"));
  CHECK(slurp(tmp.path / "w1" / "masks.json") == slurp(tmp.path / "w2" / "masks.json"));
}

TEST_CASE("baseline at ratio zero is exactly the unpruned network") {
  TempDir tmp;
  ExperimentConfig cfg = quick_config((tmp.path / "pre").string());
  const PretrainOutcome pre = run_pretrain(cfg);

  cfg.output_dir = (tmp.path / "base").string();
  const BaselineOutcome out = run_baseline(cfg, pre.net, 0.0);
  CHECK(out.pruned_accuracy == out.unpruned_accuracy);
  CHECK(out.delta_accuracy == 0.0);
  CHECK(out.sparsity_percent == 0.0);
}

TEST_CASE("baseline masks are layerwise magnitude masks") {
  TempDir tmp;
  ExperimentConfig cfg = quick_config((tmp.path / "pre").string());
  const PretrainOutcome pre = run_pretrain(cfg);

  cfg.output_dir = (tmp.path / "base").string();
  const BaselineOutcome out = run_baseline(cfg, pre.net, 0.5);
  for (std::size_t t = 0; t < out.masks.size(); ++t) {
    const ConvLayer& l = pre.net->conv_layers()[t];
    CHECK(out.masks[t] == mask_from_sparsity(filter_norms(l.weight), 0.5));
  }
}

TEST_CASE("uniform_ratio_for_target lands near the requested budget") {
  TempDir tmp;
  ExperimentConfig cfg = quick_config((tmp.path / "pre").string());
  const PretrainOutcome pre = run_pretrain(cfg);

  const double ratio = uniform_ratio_for_target(*pre.net, 50.0);
  Masks masks;
  for (const ConvLayer& l : pre.net->conv_layers()) {
    masks.push_back(mask_from_sparsity(filter_norms(l.weight), ratio));
  }
  const double achieved = remaining_param_fraction(*pre.net, masks);
  CHECK(std::fabs(achieved - 50.0) < 12.0);  // quantized by filter counts
}

TEST_CASE("binary dataset loader reads CIFAR-style records") {
  TempDir tmp;
  const std::string path = (tmp.path / "data.bin").string();
  {
    std::ofstream out(path, std::ios::binary);
    // two records: label byte + 3*2*2 pixels
    for (int rec = 0; rec < 2; ++rec) {
      const unsigned char label = static_cast<unsigned char>(rec);
      out.put(static_cast<char>(label));
      for (int i = 0; i < 12; ++i) out.put(static_cast<char>(255));
    }
  }
  const Dataset ds = load_binary_dataset(path, 3, 2, 2, 2);
  CHECK(ds.size() == 2);
  CHECK(ds.labels == std::vector<int>{0, 1});
  CHECK(ds.images[0] == doctest::Approx(1.0));

  CHECK_THROWS(load_binary_dataset((tmp.path / "missing.bin").string(), 3, 2, 2, 2));
}
