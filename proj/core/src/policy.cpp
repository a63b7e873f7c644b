#include "crlprune/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace crlprune {

namespace {
constexpr double kLogTwoPi = 1.8378770664093453;  // ln(2*pi)

std::vector<int> mlp_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims;
  dims.push_back(in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}
}  // namespace

void PolicyGrad::zero() {
  for (Tensor& t : mean_grad) t.fill(0.0);
  for (double& g : log_sigma_grad) g = 0.0;
}

GaussianPolicy::GaussianPolicy(int state_dim, int action_dim, const std::vector<int>& hidden,
                               Rng& rng, double initial_sigma)
    : mean_net_(mlp_dims(state_dim, hidden, action_dim), /*zero_init_output=*/false, rng),
      log_sigma_(static_cast<std::size_t>(action_dim), std::log(initial_sigma)) {
  if (initial_sigma <= 0.0) throw std::invalid_argument("initial sigma must be positive");
}

std::vector<double> GaussianPolicy::mean(std::span<const double> state) const {
  return mean_net_.forward(state);
}

GaussianPolicy::Sample GaussianPolicy::sample(std::span<const double> state, Rng& rng) const {
  const std::vector<double> mu = mean_net_.forward(state);
  Sample s;
  s.action.resize(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    s.action[i] = mu[i] + std::exp(log_sigma_[i]) * rng.normal();
  }
  s.log_prob = log_prob(state, s.action);
  return s;
}

double GaussianPolicy::log_prob(std::span<const double> state,
                                std::span<const double> action) const {
  const std::vector<double> mu = mean_net_.forward(state);
  if (action.size() != mu.size()) throw std::invalid_argument("action dimension mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double sigma = std::exp(log_sigma_[i]);
    const double z = (action[i] - mu[i]) / sigma;
    lp += -0.5 * kLogTwoPi - log_sigma_[i] - 0.5 * z * z;
  }
  return lp;
}

double GaussianPolicy::log_prob_with_grad(std::span<const double> state,
                                          std::span<const double> action, double upstream,
                                          PolicyGrad& grad) const {
  Mlp::Trace trace;
  const std::vector<double> mu = mean_net_.forward(state, trace);
  if (action.size() != mu.size()) throw std::invalid_argument("action dimension mismatch");

  double lp = 0.0;
  std::vector<double> grad_mu(mu.size(), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double sigma = std::exp(log_sigma_[i]);
    const double z = (action[i] - mu[i]) / sigma;
    lp += -0.5 * kLogTwoPi - log_sigma_[i] - 0.5 * z * z;
    // d lp / d mu = z / sigma; d lp / d log_sigma = z^2 - 1
    grad_mu[i] = upstream * z / sigma;
    grad.log_sigma_grad[i] += upstream * (z * z - 1.0);
  }
  mean_net_.backward(trace, grad_mu, grad.mean_grad);
  return lp;
}

PolicyGrad GaussianPolicy::make_grad() const {
  PolicyGrad g;
  g.mean_grad = mean_net_.make_grad();
  g.log_sigma_grad.assign(log_sigma_.size(), 0.0);
  return g;
}

std::vector<double> GaussianPolicy::get_parameters() const {
  std::vector<double> flat = mean_net_.get_parameters();
  flat.insert(flat.end(), log_sigma_.begin(), log_sigma_.end());
  return flat;
}

void GaussianPolicy::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("policy parameter vector length mismatch");
  }
  std::vector<double> mean_part(flat.begin(), flat.end() - static_cast<long>(log_sigma_.size()));
  mean_net_.set_parameters(mean_part);
  std::copy(flat.end() - static_cast<long>(log_sigma_.size()), flat.end(), log_sigma_.begin());
}

std::size_t GaussianPolicy::parameter_count() const {
  return mean_net_.parameter_count() + log_sigma_.size();
}

PolicyOptimizer::PolicyOptimizer(const GaussianPolicy& policy, AdamConfig cfg)
    : mean_opt_(policy.mean_net(), cfg),
      sigma_state_{0, Tensor::zeros({policy.action_dim()}), Tensor::zeros({policy.action_dim()})},
      cfg_(cfg) {}

void PolicyOptimizer::step(GaussianPolicy& policy, const PolicyGrad& grad, double lr) {
  mean_opt_.step(policy.mean_net(), grad.mean_grad, lr);
  Tensor sigma_param({policy.action_dim()}, policy.log_sigma());
  Tensor sigma_grad({policy.action_dim()}, grad.log_sigma_grad);
  adam_update(sigma_param, sigma_grad, sigma_state_, cfg_, lr);
  policy.log_sigma() = sigma_param.data;
}

ValueNet::ValueNet(int state_dim, const std::vector<int>& hidden, double discount, Rng& rng)
    : net_(mlp_dims(state_dim, hidden, 1), /*zero_init_output=*/true, rng),
      discount_(discount) {}

double ValueNet::predict(std::span<const double> state) const {
  return net_.forward(state)[0];
}

double ValueNet::predict_with_grad(std::span<const double> state, double upstream,
                                   std::vector<Tensor>& grad) const {
  Mlp::Trace trace;
  const double value = net_.forward(state, trace)[0];
  const double up[1] = {upstream};
  net_.backward(trace, up, grad);
  return value;
}

}  // namespace crlprune
