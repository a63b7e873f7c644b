#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "crlprune/environment.hpp"
#include "crlprune/network.hpp"
#include "crlprune/rng.hpp"

namespace testutil {

// central finite differences of eval() with respect to a flat parameter
// vector accessed через get/set
inline std::vector<double> finite_difference(std::function<std::vector<double>()> get,
                                             std::function<void(const std::vector<double>&)> set,
                                             std::function<double()> eval, double h = 1e-4) {
  std::vector<double> params = get();
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    set(params);
    const double up = eval();
    params[i] = saved - h;
    set(params);
    const double down = eval();
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  set(params);
  return grad;
}

// |a - b| <= rel * max(|a|, |b|) + abs_floor, elementwise; returns the number
// of failures so tests can report totals
inline std::size_t count_grad_mismatches(const std::vector<double>& analytic,
                                         const std::vector<double>& numeric, double rel,
                                         double abs_floor = 1e-8) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double tol = rel * std::max(std::fabs(analytic[i]), std::fabs(numeric[i])) + abs_floor;
    if (std::fabs(analytic[i] - numeric[i]) > tol) ++bad;
  }
  return bad;
}

// exhaustive smallest-norm selection: first zero-index-set (in lexicographic
// subset order) whose pruned-norm sum is minimal
inline std::vector<std::uint8_t> brute_force_mask(const std::vector<double>& norms,
                                                  std::size_t zeros) {
  const std::size_t n = norms.size();
  std::vector<std::uint8_t> best;
  double best_sum = 0.0;
  std::vector<std::size_t> pick(zeros);
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t start,
                                                                  std::size_t chosen,
                                                                  double sum) {
    if (chosen == zeros) {
      if (best.empty() || sum < best_sum - 1e-15) {
        best.assign(n, 1);
        for (std::size_t i = 0; i < zeros; ++i) best[pick[i]] = 0;
        best_sum = sum;
      }
      return;
    }
    for (std::size_t i = start; i + (zeros - chosen) <= n; ++i) {
      pick[chosen] = i;
      rec(i + 1, chosen + 1, sum + norms[i]);
    }
  };
  rec(0, 0, 0.0);
  if (zeros == 0) best.assign(n, 1);
  return best;
}

// Deterministic fixed-horizon test environment: terminal reward
// -(a_last - 1)^2, terminal cost = sum of raw actions. States are one-hot
// step encodings.
class ToyEnv : public crlprune::Environment {
 public:
  explicit ToyEnv(int horizon = 3) : horizon_(horizon) {}

  crlprune::StateVec reset(std::uint64_t seed) override {
    seed_ = seed;
    step_ = 0;
    action_sum_ = 0.0;
    last_action_ = 0.0;
    return state();
  }

  crlprune::StepResult step(std::span<const double> action) override {
    last_action_ = action[0];
    action_sum_ += action[0];
    ++step_;
    crlprune::StepResult res;
    res.applied_action = action[0];
    res.state = state();
    if (step_ == horizon_) {
      res.reward = -(last_action_ - 1.0) * (last_action_ - 1.0);
      res.cost = action_sum_;
      res.done = true;
    }
    return res;
  }

  int state_dim() const override { return horizon_; }
  int horizon() const override { return horizon_; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<ToyEnv>(horizon_);
  }

 private:
  crlprune::StateVec state() const {
    crlprune::StateVec s(static_cast<std::size_t>(horizon_), 0.0);
    if (step_ < horizon_) s[static_cast<std::size_t>(step_)] = 1.0;
    return s;
  }

  int horizon_;
  int step_ = 0;
  std::uint64_t seed_ = 0;
  double action_sum_ = 0.0;
  double last_action_ = 0.0;
};

inline crlprune::Network tiny_net(crlprune::Rng& rng) {
  return crlprune::Network(crlprune::InputShape{2, 5, 5},
                           {{3, 3, 1, 1}, {4, 3, 2, 0}}, {}, 2, rng);
}

}  // namespace testutil
