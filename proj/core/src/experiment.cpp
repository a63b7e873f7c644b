#include "crlprune/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "crlprune/checkpoint.hpp"
#include "crlprune/pruning.hpp"

namespace crlprune {

namespace {

using json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

json dataset_to_json(const DatasetSpec& d) {
  return json{{"type", d.type},
              {"train_size", d.synthetic.train_size},
              {"test_size", d.synthetic.test_size},
              {"channels", d.synthetic.channels},
              {"height", d.synthetic.height},
              {"width", d.synthetic.width},
              {"classes", d.synthetic.classes},
              {"noise", d.synthetic.noise},
              {"jitter", d.synthetic.jitter},
              {"path", d.path}};
}

void dataset_from_json(const json& j, DatasetSpec& d) {
  d.type = j.value("type", d.type);
  d.synthetic.train_size = j.value("train_size", d.synthetic.train_size);
  d.synthetic.test_size = j.value("test_size", d.synthetic.test_size);
  d.synthetic.channels = j.value("channels", d.synthetic.channels);
  d.synthetic.height = j.value("height", d.synthetic.height);
  d.synthetic.width = j.value("width", d.synthetic.width);
  d.synthetic.classes = j.value("classes", d.synthetic.classes);
  d.synthetic.noise = j.value("noise", d.synthetic.noise);
  d.synthetic.jitter = j.value("jitter", d.synthetic.jitter);
  d.path = j.value("path", d.path);
}

}  // namespace

std::string ExperimentConfig::to_json_string() const {
  json conv = json::array();
  for (const ConvSpec& c : network.conv) {
    conv.push_back({{"filters", c.filters},
                    {"kernel", c.kernel},
                    {"stride", c.stride},
                    {"padding", c.padding}});
  }
  json j{{"format_version", format_version},
         {"seed", seed},
         {"output_dir", output_dir},
         {"workers", workers},
         {"dataset", dataset_to_json(dataset)},
         {"network", {{"conv", conv}, {"hidden", network.hidden}}},
         {"pretrain",
          {{"steps", pretrain.steps}, {"lr", pretrain.lr}, {"batch_size", pretrain.batch_size}}},
         {"policy", {{"hidden", policy.hidden}, {"initial_sigma", policy.initial_sigma}}},
         {"lagrange", {{"lambda_init", lagrange.lambda_init}, {"lr", lagrange.lr}}},
         {"env",
          {{"alpha", env.alpha},
           {"batch_size", env.batch_size},
           {"finetune_schedule", env.finetune_schedule},
           {"finetune_lr", env.finetune_lr},
           {"reward_mode", to_string(env.reward_mode)},
           {"cost", env.cost},
           {"discount", env.discount}}},
         {"ppo",
          {{"clip", ppo.clip},
           {"lr_policy", ppo.lr_policy},
           {"lr_value_r", ppo.lr_value_r},
           {"lr_value_c", ppo.lr_value_c},
           {"epochs", ppo.epochs},
           {"minibatch", ppo.minibatch},
           {"iterations", ppo.iterations},
           {"episodes_per_iteration", ppo.episodes_per_iteration},
           {"discount", ppo.discount},
           {"gamma_r", ppo.gamma_r},
           {"gamma_c", ppo.gamma_c},
           {"normalize_signals", ppo.normalize_signals},
           {"baseline_on_next_state", ppo.baseline_on_next_state}}}};
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  const int version = j.value("format_version", 1);
  if (version != 1) {
    throw std::runtime_error("unsupported config format_version " + std::to_string(version));
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.workers = j.value("workers", cfg.workers);
  if (j.contains("dataset")) dataset_from_json(j.at("dataset"), cfg.dataset);
  if (j.contains("network")) {
    const json& n = j.at("network");
    if (n.contains("conv")) {
      cfg.network.conv.clear();
      for (const json& c : n.at("conv")) {
        cfg.network.conv.push_back(ConvSpec{c.value("filters", 8), c.value("kernel", 3),
                                            c.value("stride", 1), c.value("padding", 0)});
      }
    }
    cfg.network.hidden = n.value("hidden", cfg.network.hidden);
  }
  if (j.contains("pretrain")) {
    const json& p = j.at("pretrain");
    cfg.pretrain.steps = p.value("steps", cfg.pretrain.steps);
    cfg.pretrain.lr = p.value("lr", cfg.pretrain.lr);
    cfg.pretrain.batch_size = p.value("batch_size", cfg.pretrain.batch_size);
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    cfg.policy.hidden = p.value("hidden", cfg.policy.hidden);
    cfg.policy.initial_sigma = p.value("initial_sigma", cfg.policy.initial_sigma);
  }
  if (j.contains("lagrange")) {
    const json& l = j.at("lagrange");
    cfg.lagrange.lambda_init = l.value("lambda_init", cfg.lagrange.lambda_init);
    cfg.lagrange.lr = l.value("lr", cfg.lagrange.lr);
  }
  if (j.contains("env")) {
    const json& e = j.at("env");
    cfg.env.alpha = e.value("alpha", cfg.env.alpha);
    cfg.env.batch_size = e.value("batch_size", cfg.env.batch_size);
    cfg.env.finetune_schedule = e.value("finetune_schedule", cfg.env.finetune_schedule);
    cfg.env.finetune_lr = e.value("finetune_lr", cfg.env.finetune_lr);
    if (e.contains("reward_mode")) {
      cfg.env.reward_mode = reward_mode_from_string(e.at("reward_mode").get<std::string>());
    }
    cfg.env.cost = e.value("cost", cfg.env.cost);
    cfg.env.discount = e.value("discount", cfg.env.discount);
  }
  if (j.contains("ppo")) {
    const json& p = j.at("ppo");
    cfg.ppo.clip = p.value("clip", cfg.ppo.clip);
    cfg.ppo.lr_policy = p.value("lr_policy", cfg.ppo.lr_policy);
    cfg.ppo.lr_value_r = p.value("lr_value_r", cfg.ppo.lr_value_r);
    cfg.ppo.lr_value_c = p.value("lr_value_c", cfg.ppo.lr_value_c);
    cfg.ppo.epochs = p.value("epochs", cfg.ppo.epochs);
    cfg.ppo.minibatch = p.value("minibatch", cfg.ppo.minibatch);
    cfg.ppo.iterations = p.value("iterations", cfg.ppo.iterations);
    cfg.ppo.episodes_per_iteration =
        p.value("episodes_per_iteration", cfg.ppo.episodes_per_iteration);
    cfg.ppo.discount = p.value("discount", cfg.ppo.discount);
    cfg.ppo.gamma_r = p.value("gamma_r", cfg.ppo.gamma_r);
    cfg.ppo.gamma_c = p.value("gamma_c", cfg.ppo.gamma_c);
    cfg.ppo.normalize_signals = p.value("normalize_signals", cfg.ppo.normalize_signals);
    cfg.ppo.baseline_on_next_state =
        p.value("baseline_on_next_state", cfg.ppo.baseline_on_next_state);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << to_json_string();
}

void ExperimentConfig::validate() const {
  if (network.conv.empty()) throw std::invalid_argument("network needs conv layers");
  if (pretrain.steps < 0 || pretrain.batch_size <= 0 || pretrain.lr <= 0.0) {
    throw std::invalid_argument("bad pretrain settings");
  }
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (policy.initial_sigma <= 0.0) throw std::invalid_argument("initial_sigma must be positive");
  if (lagrange.lambda_init < 0.0 || lagrange.lr < 0.0) {
    throw std::invalid_argument("bad lagrange settings");
  }
  if (dataset.type != "synthetic" && dataset.type != "binary") {
    throw std::invalid_argument("dataset type must be synthetic or binary");
  }
  env.validate();
  ppo.validate();
  CostFunction::parse(env.cost);
}

Dataset build_dataset(const ExperimentConfig& cfg, bool train) {
  Rng root(cfg.seed);
  if (cfg.dataset.type == "binary") {
    // one file; train/test split by leading fraction
    Dataset all = load_binary_dataset(cfg.dataset.path, cfg.dataset.synthetic.channels,
                                      cfg.dataset.synthetic.height, cfg.dataset.synthetic.width,
                                      cfg.dataset.synthetic.classes);
    const int n = all.size();
    const int train_n = std::max(1, n * 4 / 5);
    std::vector<int> idx;
    if (train) {
      for (int i = 0; i < train_n; ++i) idx.push_back(i);
    } else {
      for (int i = train_n; i < n; ++i) idx.push_back(i);
      if (idx.empty()) idx.push_back(n - 1);
    }
    Dataset out;
    out.class_count = all.class_count;
    out.images = all.gather_images(idx);
    out.labels = all.gather_labels(idx);
    return out;
  }
  Rng stream = root.split(train ? "dataset-train" : "dataset-test");
  const int count = train ? cfg.dataset.synthetic.train_size : cfg.dataset.synthetic.test_size;
  return make_synthetic_dataset(cfg.dataset.synthetic, count, stream);
}

namespace {

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

json masks_to_json(const Masks& masks) {
  json j = json::array();
  for (const auto& m : masks) j.push_back(m);
  return j;
}

}  // namespace

void write_iterations_csv(const std::vector<IterationLog>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iter,mean_reward,mean_cost,lambda,mean_sparsity\n";
  for (const IterationLog& r : rows) {
    out << r.iteration << ',' << fmt(r.mean_reward) << ',' << fmt(r.mean_cost) << ','
        << fmt(r.lambda) << ',' << fmt(r.mean_sparsity) << '\n';
  }
}

void write_episodes_csv(const std::vector<EpisodeLogRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "episode,layer,action,sparsity,reward,cost,lambda\n";
  for (const EpisodeLogRow& r : rows) {
    out << r.episode << ',' << r.layer << ',' << fmt(r.action) << ',' << fmt(r.sparsity) << ','
        << fmt(r.reward) << ',' << fmt(r.cost) << ',' << fmt(r.lambda) << '\n';
  }
}

PretrainOutcome run_pretrain(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const Dataset train_set = build_dataset(cfg, true);
  const Dataset test_set = build_dataset(cfg, false);

  Rng root(cfg.seed);
  Rng net_rng = root.split("pretrain-net");
  InputShape input{cfg.dataset.synthetic.channels, cfg.dataset.synthetic.height,
                   cfg.dataset.synthetic.width};
  auto net = std::make_shared<Network>(input, cfg.network.conv, cfg.network.hidden,
                                       cfg.dataset.synthetic.classes, net_rng);

  Rng batch_rng = root.split("pretrain-batches");
  NetOptimizer opt(*net);
  double last_loss = 0.0;
  for (int step = 0; step < cfg.pretrain.steps; ++step) {
    std::vector<int> idx(static_cast<std::size_t>(cfg.pretrain.batch_size));
    for (int& i : idx) {
      i = static_cast<int>(batch_rng.uniform_index(static_cast<std::size_t>(train_set.size())));
    }
    last_loss = net->train_step(train_set.gather_images(idx), train_set.gather_labels(idx), opt,
                                cfg.pretrain.lr);
    if (log && (step + 1) % 100 == 0) {
      (*log) << "pretrain step " << step + 1 << "  loss " << last_loss << "\n";
    }
  }

  PretrainOutcome out;
  out.net = net;
  out.final_loss = last_loss;
  out.train_accuracy = evaluate_accuracy(*net, train_set.images, train_set.labels);
  out.test_accuracy = evaluate_accuracy(*net, test_set.images, test_set.labels);

  ensure_dir(cfg.output_dir);
  const std::filesystem::path dir(cfg.output_dir);
  cfg.save((dir / "config.json").string());
  save_network(*net, (dir / "checkpoint.json").string());
  write_json_file(json{{"format_version", 1},
                       {"command", "pretrain"},
                       {"seed", cfg.seed},
                       {"steps", cfg.pretrain.steps},
                       {"final_loss", out.final_loss},
                       {"train_accuracy", out.train_accuracy},
                       {"test_accuracy", out.test_accuracy}},
                  (dir / "summary.json").string());
  if (log) {
    (*log) << "pretrained: train accuracy " << out.train_accuracy << ", test accuracy "
           << out.test_accuracy << "\n";
  }
  return out;
}

PruneOutcome run_prune(const ExperimentConfig& cfg, std::shared_ptr<const Network> pretrained,
                       std::ostream* log) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  auto train_set = std::make_shared<Dataset>(build_dataset(cfg, true));
  const Dataset test_set = build_dataset(cfg, false);

  PruneEnv env(pretrained, train_set, cfg.env);

  Rng root(cfg.seed);
  Rng policy_rng = root.split("policy-init");
  Rng vr_rng = root.split("value-r-init");
  Rng vc_rng = root.split("value-c-init");
  GaussianPolicy policy(env.state_dim(), 1, cfg.policy.hidden, policy_rng,
                        cfg.policy.initial_sigma);
  ValueNet value_r(env.state_dim(), cfg.policy.hidden, cfg.ppo.gamma_r, vr_rng);
  ValueNet value_c(env.state_dim(), cfg.policy.hidden, cfg.ppo.gamma_c, vc_rng);
  LagrangeState lag{cfg.lagrange.lambda_init, cfg.env.alpha, cfg.lagrange.lr};

  Rng train_rng = root.split("train");
  PruneOutcome out;
  out.report = train(cfg.ppo, env, policy, value_r, value_c, lag, train_rng, cfg.workers, log);

  const EpisodeOutcome& delivered = env.last_outcome();
  out.masks = delivered.masks;
  out.sparsities = delivered.sparsities;
  out.final_cost = delivered.cost;
  out.remaining_param_percent = remaining_param_fraction(*pretrained, delivered.masks);
  out.sparsity_percent = 100.0 - out.remaining_param_percent;
  out.unpruned_accuracy = evaluate_accuracy(*pretrained, test_set.images, test_set.labels);
  out.pruned_accuracy =
      evaluate_accuracy(*delivered.pruned_net, test_set.images, test_set.labels);
  out.delta_accuracy = out.pruned_accuracy - out.unpruned_accuracy;
  out.lambda_final = lag.lambda;
  out.budget_satisfied = out.final_cost <= cfg.env.alpha;

  const double wallclock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ensure_dir(cfg.output_dir);
  const std::filesystem::path dir(cfg.output_dir);
  cfg.save((dir / "config.json").string());
  write_iterations_csv(out.report.iterations, (dir / "iterations.csv").string());
  write_episodes_csv(out.report.episode_rows, (dir / "episodes.csv").string());
  save_network(*delivered.pruned_net, (dir / "checkpoint.json").string());
  save_agent(policy, value_r, value_c, (dir / "agent.json").string());
  write_json_file(json{{"format_version", 1},
                       {"masks", masks_to_json(delivered.masks)},
                       {"sparsities", delivered.sparsities},
                       {"cost", delivered.cost},
                       {"cost_function", cfg.env.cost},
                       {"alpha", cfg.env.alpha}},
                  (dir / "masks.json").string());
  write_json_file(json{{"format_version", 1},
                       {"command", "prune"},
                       {"seed", cfg.seed},
                       {"alpha", cfg.env.alpha},
                       {"cost_function", cfg.env.cost},
                       {"final_cost", out.final_cost},
                       {"budget_satisfied", out.budget_satisfied},
                       {"sparsity_percent", out.sparsity_percent},
                       {"remaining_param_percent", out.remaining_param_percent},
                       {"unpruned_test_accuracy", out.unpruned_accuracy},
                       {"pruned_test_accuracy", out.pruned_accuracy},
                       {"delta_accuracy", out.delta_accuracy},
                       {"lambda_final", out.lambda_final},
                       {"iterations", cfg.ppo.iterations},
                       {"wallclock_seconds", wallclock}},
                  (dir / "summary.json").string());
  if (log) {
    (*log) << "prune: cost " << out.final_cost << " (alpha " << cfg.env.alpha << "), sparsity "
           << out.sparsity_percent << "%, accuracy " << out.pruned_accuracy << " (unpruned "
           << out.unpruned_accuracy << ")\n";
  }
  return out;
}

double uniform_ratio_for_target(const Network& net, double target_remaining_percent) {
  double best_ratio = 0.0;
  double best_err = std::abs(100.0 - target_remaining_percent);
  for (int i = 1; i <= 950; ++i) {
    const double ratio = i / 1000.0;
    Masks masks;
    for (const ConvLayer& l : net.conv_layers()) {
      masks.push_back(mask_from_sparsity(filter_norms(l.weight), ratio));
    }
    const double err = std::abs(remaining_param_fraction(net, masks) - target_remaining_percent);
    if (err < best_err - 1e-12) {
      best_err = err;
      best_ratio = ratio;
    }
  }
  return best_ratio;
}

BaselineOutcome run_baseline(const ExperimentConfig& cfg,
                             std::shared_ptr<const Network> pretrained, double ratio,
                             std::ostream* log) {
  cfg.validate();
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("baseline ratio must lie in [0, 1)");
  }
  const Dataset train_set = build_dataset(cfg, true);
  const Dataset test_set = build_dataset(cfg, false);

  BaselineOutcome out;
  out.ratio = ratio;
  for (const ConvLayer& l : pretrained->conv_layers()) {
    out.masks.push_back(mask_from_sparsity(filter_norms(l.weight), ratio));
  }

  Network net(*pretrained);
  net.apply_mask(out.masks);

  // same fine-tuning budget as a delivered CRL episode
  const int iterations = cfg.env.finetune_schedule.back();
  Rng root(cfg.seed);
  Rng batch_rng = root.split("baseline-finetune");
  if (iterations > 0 && ratio > 0.0) {
    NetOptimizer opt(net);
    for (int it = 0; it < iterations; ++it) {
      std::vector<int> idx(static_cast<std::size_t>(cfg.env.batch_size));
      for (int& i : idx) {
        i = static_cast<int>(batch_rng.uniform_index(static_cast<std::size_t>(train_set.size())));
      }
      net.train_step(train_set.gather_images(idx), train_set.gather_labels(idx), opt,
                     cfg.env.finetune_lr);
    }
  }

  out.remaining_param_percent = remaining_param_fraction(*pretrained, out.masks);
  out.sparsity_percent = 100.0 - out.remaining_param_percent;
  out.unpruned_accuracy = evaluate_accuracy(*pretrained, test_set.images, test_set.labels);
  out.pruned_accuracy = evaluate_accuracy(net, test_set.images, test_set.labels);
  out.delta_accuracy = out.pruned_accuracy - out.unpruned_accuracy;

  ensure_dir(cfg.output_dir);
  const std::filesystem::path dir(cfg.output_dir);
  cfg.save((dir / "config.json").string());
  write_json_file(json{{"format_version", 1},
                       {"masks", masks_to_json(out.masks)},
                       {"ratio", ratio},
                       {"cost_function", "param_fraction"},
                       {"alpha", cfg.env.alpha}},
                  (dir / "masks.json").string());
  write_json_file(json{{"format_version", 1},
                       {"command", "baseline"},
                       {"seed", cfg.seed},
                       {"ratio", ratio},
                       {"sparsity_percent", out.sparsity_percent},
                       {"remaining_param_percent", out.remaining_param_percent},
                       {"unpruned_test_accuracy", out.unpruned_accuracy},
                       {"pruned_test_accuracy", out.pruned_accuracy},
                       {"delta_accuracy", out.delta_accuracy},
                       {"finetune_iterations", iterations}},
                  (dir / "summary.json").string());
  if (log) {
    (*log) << "baseline: ratio " << ratio << ", sparsity " << out.sparsity_percent
           << "%, accuracy " << out.pruned_accuracy << " (unpruned " << out.unpruned_accuracy
           << ")\n";
  }
  return out;
}

}  // namespace crlprune
