#include "crlprune/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "crlprune/layers.hpp"

namespace crlprune {

Mlp::Mlp(std::vector<int> dims, bool zero_init_output, Rng& rng) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw std::invalid_argument("mlp needs at least input and output dims");
  Rng init = rng.split("mlp-init");
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    DenseLayer d;
    d.in_features = dims_[i];
    d.out_features = dims_[i + 1];
    d.weight = Tensor::zeros({d.out_features, d.in_features});
    d.bias = Tensor::zeros({d.out_features});
    const bool last = i + 2 == dims_.size();
    if (!(last && zero_init_output)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(d.in_features));
      for (double& x : d.weight.data) x = init.uniform(-limit, limit);
    }
    layers_.push_back(std::move(d));
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Trace trace;
  return forward(x, trace);
}

std::vector<double> Mlp::forward(std::span<const double> x, Trace& trace) const {
  if (static_cast<int>(x.size()) != dims_.front()) {
    throw std::invalid_argument("mlp input size mismatch");
  }
  trace.inputs.clear();
  trace.post.clear();
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const DenseLayer& d = layers_[li];
    std::vector<double> y(static_cast<std::size_t>(d.out_features), 0.0);
    dense_forward(cur.data(), 1, d.in_features, d.weight.data.data(), d.bias.data.data(),
                  d.out_features, y.data());
    const bool last = li + 1 == layers_.size();
    if (!last) tanh_forward(y.data(), y.size());
    trace.inputs.push_back(std::move(cur));
    trace.post.push_back(y);
    cur = std::move(y);
  }
  return cur;
}

void Mlp::backward(const Trace& trace, std::span<const double> grad_out,
                   std::vector<Tensor>& grad) const {
  std::vector<double> upstream(grad_out.begin(), grad_out.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const DenseLayer& d = layers_[li];
    const bool last = li + 1 == layers_.size();
    if (!last) tanh_backward(trace.post[li].data(), upstream.data(), upstream.size());
    std::vector<double> grad_in(static_cast<std::size_t>(d.in_features), 0.0);
    dense_backward(trace.inputs[li].data(), 1, d.in_features, d.weight.data.data(),
                   d.out_features, upstream.data(), grad_in.data(), grad[2 * li].data.data(),
                   grad[2 * li + 1].data.data());
    upstream = std::move(grad_in);
  }
}

std::vector<Tensor> Mlp::make_grad() const {
  std::vector<Tensor> grad;
  for (const Tensor* t : parameter_tensors()) grad.push_back(Tensor::zeros(t->shape));
  return grad;
}

std::vector<Tensor*> Mlp::parameter_tensors() {
  std::vector<Tensor*> out;
  for (DenseLayer& d : layers_) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  }
  return out;
}

std::vector<const Tensor*> Mlp::parameter_tensors() const {
  std::vector<const Tensor*> out;
  for (const DenseLayer& d : layers_) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  }
  return out;
}

std::vector<double> Mlp::get_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Tensor* t : parameter_tensors()) {
    flat.insert(flat.end(), t->data.begin(), t->data.end());
  }
  return flat;
}

void Mlp::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("mlp parameter vector length mismatch");
  }
  std::size_t off = 0;
  for (Tensor* t : parameter_tensors()) {
    std::copy(flat.begin() + off, flat.begin() + off + t->numel(), t->data.begin());
    off += t->numel();
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameter_tensors()) n += t->numel();
  return n;
}

MlpOptimizer::MlpOptimizer(const Mlp& mlp, AdamConfig cfg) : config(cfg) {
  for (const Tensor* t : mlp.parameter_tensors()) {
    states.push_back(AdamState{0, Tensor::zeros(t->shape), Tensor::zeros(t->shape)});
  }
}

void MlpOptimizer::step(Mlp& mlp, const std::vector<Tensor>& grad, double lr) {
  std::vector<Tensor*> params = mlp.parameter_tensors();
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(*params[i], grad[i], states[i], config, lr);
  }
}

}  // namespace crlprune
