#pragma once

#include <span>
#include <vector>

#include "crlprune/mlp.hpp"
#include "crlprune/rng.hpp"

namespace crlprune {

struct PolicyGrad {
  std::vector<Tensor> mean_grad;
  std::vector<double> log_sigma_grad;
  void zero();
};

// Diagonal Gaussian policy: a trainable mean network plus a global trainable
// log-sigma vector, one entry per action dimension.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng,
                 double initial_sigma = 0.5);

  std::vector<double> mean(std::span<const double> state) const;

  struct Sample {
    std::vector<double> action;
    double log_prob = 0.0;
  };
  Sample sample(std::span<const double> state, Rng& rng) const;

  double log_prob(std::span<const double> state, std::span<const double> action) const;

  // accumulates upstream * d(log_prob)/d(params) into grad, returns log_prob
  double log_prob_with_grad(std::span<const double> state, std::span<const double> action,
                            double upstream, PolicyGrad& grad) const;

  PolicyGrad make_grad() const;

  int state_dim() const { return mean_net_.input_dim(); }
  int action_dim() const { return static_cast<int>(log_sigma_.size()); }

  const Mlp& mean_net() const { return mean_net_; }
  Mlp& mean_net() { return mean_net_; }
  const std::vector<double>& log_sigma() const { return log_sigma_; }
  std::vector<double>& log_sigma() { return log_sigma_; }

  // flattened mean-net params followed by log_sigma
  std::vector<double> get_parameters() const;
  void set_parameters(const std::vector<double>& flat);
  std::size_t parameter_count() const;

 private:
  Mlp mean_net_;
  std::vector<double> log_sigma_;
};

class PolicyOptimizer {
 public:
  explicit PolicyOptimizer(const GaussianPolicy& policy, AdamConfig cfg = {});
  void step(GaussianPolicy& policy, const PolicyGrad& grad, double lr);

 private:
  MlpOptimizer mean_opt_;
  AdamState sigma_state_;
  AdamConfig cfg_;
};

// Scalar state-value head with its own TD discount.
class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(int state_dim, const std::vector<int>& hidden, double discount, Rng& rng);

  double predict(std::span<const double> state) const;

  // accumulates upstream * d(value)/d(params), returns the value
  double predict_with_grad(std::span<const double> state, double upstream,
                           std::vector<Tensor>& grad) const;

  double discount() const { return discount_; }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }

 private:
  Mlp net_;
  double discount_ = 0.99;
};

}  // namespace crlprune
