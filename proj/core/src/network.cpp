#include "crlprune/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace crlprune {

namespace {

double he_uniform_limit(int fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

void init_uniform(Tensor& t, double limit, Rng& rng) {
  for (double& x : t.data) x = rng.uniform(-limit, limit);
}

}  // namespace

struct ForwardTrace {
  std::vector<Tensor> conv_in;   // input of each conv layer
  std::vector<Tensor> conv_pre;  // pre-ReLU conv outputs
  Tensor flat;                   // head input (post flatten)
  std::vector<Tensor> head_in;   // input of each dense layer
  std::vector<Tensor> head_pre;  // pre-activation dense outputs
};

Network::Network(InputShape input, const std::vector<ConvSpec>& convs,
                 const std::vector<int>& hidden, int class_count, Rng& rng)
    : input_(input), class_count_(class_count) {
  if (convs.empty()) throw std::invalid_argument("network needs at least one conv layer");
  if (class_count < 2) throw std::invalid_argument("class_count must be >= 2");

  Rng init = rng.split("net-init");
  int channels = input.channels;
  int h = input.height;
  int w = input.width;
  int t = 1;
  for (const ConvSpec& cs : convs) {
    ConvLayer layer;
    layer.spec = LayerSpec{t, LayerKind::conv, channels, cs.filters, cs.kernel, cs.stride,
                           cs.padding};
    layer.spec.validate();
    layer.weight = Tensor::zeros({cs.filters, channels, cs.kernel, cs.kernel});
    layer.bias = Tensor::zeros({cs.filters});
    init_uniform(layer.weight, he_uniform_limit(channels * cs.kernel * cs.kernel), init);
    layer.mask.assign(static_cast<std::size_t>(cs.filters), 1);
    h = conv_out_dim(h, cs.kernel, cs.stride, cs.padding);
    w = conv_out_dim(w, cs.kernel, cs.stride, cs.padding);
    if (h <= 0 || w <= 0) {
      throw std::invalid_argument("conv layer " + std::to_string(t) +
                                  " shrinks the input to nothing");
    }
    channels = cs.filters;
    conv_.push_back(std::move(layer));
    ++t;
  }
  flat_features_ = channels * h * w;

  int in_f = flat_features_;
  for (int width_h : hidden) {
    DenseLayer d;
    d.in_features = in_f;
    d.out_features = width_h;
    d.weight = Tensor::zeros({width_h, in_f});
    d.bias = Tensor::zeros({width_h});
    init_uniform(d.weight, he_uniform_limit(in_f), init);
    head_.push_back(std::move(d));
    in_f = width_h;
  }
  DenseLayer out;
  out.in_features = in_f;
  out.out_features = class_count;
  out.weight = Tensor::zeros({class_count, in_f});
  out.bias = Tensor::zeros({class_count});
  init_uniform(out.weight, he_uniform_limit(in_f), init);
  head_.push_back(std::move(out));
}

void Network::check_batch(const Tensor& batch) const {
  if (batch.shape.size() != 4) throw std::invalid_argument("batch must be [n,c,h,w]");
  if (batch.dim(1) != conv_[0].spec.in_channels) {
    throw std::invalid_argument("layer 1: expected " +
                                std::to_string(conv_[0].spec.in_channels) + " input channels, got " +
                                std::to_string(batch.dim(1)));
  }
  int h = batch.dim(2);
  int w = batch.dim(3);
  for (const ConvLayer& layer : conv_) {
    h = conv_out_dim(h, layer.spec.kernel_size, layer.spec.stride, layer.spec.padding);
    w = conv_out_dim(w, layer.spec.kernel_size, layer.spec.stride, layer.spec.padding);
    if (h <= 0 || w <= 0) {
      throw std::invalid_argument("layer " + std::to_string(layer.spec.index) +
                                  ": spatial dims collapse to zero");
    }
  }
  if (conv_.back().spec.num_filters * h * w != flat_features_) {
    throw std::invalid_argument("head: flattened size " +
                                std::to_string(conv_.back().spec.num_filters * h * w) +
                                " does not match " + std::to_string(flat_features_));
  }
}

Tensor Network::forward_internal(const Tensor& batch, ForwardTrace* trace) const {
  check_batch(batch);
  const int n = batch.dim(0);

  Tensor x = batch;
  int h = batch.dim(2);
  int w = batch.dim(3);
  for (std::size_t li = 0; li < conv_.size(); ++li) {
    const ConvLayer& layer = conv_[li];
    const int oh = conv_out_dim(h, layer.spec.kernel_size, layer.spec.stride, layer.spec.padding);
    const int ow = conv_out_dim(w, layer.spec.kernel_size, layer.spec.stride, layer.spec.padding);
    Tensor y = Tensor::zeros({n, layer.spec.num_filters, oh, ow});
    conv2d_forward(x.data.data(), n, layer.spec.in_channels, h, w, layer.weight.data.data(),
                   layer.bias.data.data(), layer.spec.num_filters, layer.spec.kernel_size,
                   layer.spec.stride, layer.spec.padding, y.data.data());
    if (trace) {
      trace->conv_in.push_back(std::move(x));
      trace->conv_pre.push_back(y);
    }
    relu_forward(y.data.data(), y.numel());
    x = std::move(y);
    h = oh;
    w = ow;
  }

  x.shape = {n, flat_features_};
  if (trace) trace->flat = x;

  for (std::size_t li = 0; li < head_.size(); ++li) {
    const DenseLayer& d = head_[li];
    Tensor y = Tensor::zeros({n, d.out_features});
    dense_forward(x.data.data(), n, d.in_features, d.weight.data.data(), d.bias.data.data(),
                  d.out_features, y.data.data());
    const bool last = li + 1 == head_.size();
    if (trace) {
      trace->head_in.push_back(std::move(x));
      trace->head_pre.push_back(y);
    }
    if (!last) relu_forward(y.data.data(), y.numel());
    x = std::move(y);
  }
  return x;
}

Tensor Network::forward(const Tensor& batch) const { return forward_internal(batch, nullptr); }

Tensor softmax_rows(const Tensor& logits) {
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  Tensor p = Tensor::zeros({n, k});
  for (int i = 0; i < n; ++i) {
    const double* z = logits.data.data() + static_cast<std::size_t>(i) * k;
    double* row = p.data.data() + static_cast<std::size_t>(i) * k;
    double zmax = z[0];
    for (int j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      row[j] = std::exp(z[j] - zmax);
      sum += row[j];
    }
    for (int j = 0; j < k; ++j) row[j] /= sum;
  }
  return p;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad_logits) {
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("labels length does not match batch");
  }
  double total = 0.0;
  if (grad_logits) *grad_logits = Tensor::zeros({n, k});
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= k) throw std::invalid_argument("label out of range");
    const double* z = logits.data.data() + static_cast<std::size_t>(i) * k;
    double zmax = z[0];
    for (int j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(z[j] - zmax);
    const double logsum = std::log(sum) + zmax;
    total += logsum - z[y];
    if (grad_logits) {
      double* g = grad_logits->data.data() + static_cast<std::size_t>(i) * k;
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(z[j] - logsum);
        g[j] = (p - (j == y ? 1.0 : 0.0)) / n;
      }
    }
  }
  return total / n;
}

double Network::loss(const Tensor& batch, const std::vector<int>& labels) const {
  Tensor logits = forward(batch);
  return cross_entropy(logits, labels, nullptr);
}

NetGrad Network::make_grad() const {
  NetGrad g;
  for (const Tensor* t : parameter_tensors()) g.tensors.push_back(Tensor::zeros(t->shape));
  return g;
}

void NetGrad::zero() {
  for (Tensor& t : tensors) t.fill(0.0);
}

std::vector<Tensor*> Network::parameter_tensors() {
  std::vector<Tensor*> out;
  for (ConvLayer& l : conv_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (DenseLayer& d : head_) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  }
  return out;
}

std::vector<const Tensor*> Network::parameter_tensors() const {
  std::vector<const Tensor*> out;
  for (const ConvLayer& l : conv_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (const DenseLayer& d : head_) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  }
  return out;
}

double Network::loss_with_gradient(const Tensor& batch, const std::vector<int>& labels,
                                   NetGrad& grad) const {
  ForwardTrace trace;
  Tensor logits = forward_internal(batch, &trace);
  Tensor grad_logits;
  const double loss_value = cross_entropy(logits, labels, &grad_logits);

  const int n = batch.dim(0);
  const std::size_t conv_count = conv_.size();

  // head backward
  Tensor upstream = std::move(grad_logits);
  for (std::size_t li = head_.size(); li-- > 0;) {
    const DenseLayer& d = head_[li];
    const bool last = li + 1 == head_.size();
    if (!last) relu_backward(trace.head_pre[li].data.data(), upstream.data.data(),
                             upstream.numel());
    Tensor grad_in = Tensor::zeros({n, d.in_features});
    Tensor& gw = grad.tensors[2 * (conv_count + li)];
    Tensor& gb = grad.tensors[2 * (conv_count + li) + 1];
    dense_backward(trace.head_in[li].data.data(), n, d.in_features, d.weight.data.data(),
                   d.out_features, upstream.data.data(), grad_in.data.data(), gw.data.data(),
                   gb.data.data());
    upstream = std::move(grad_in);
  }

  // conv backward
  for (std::size_t li = conv_.size(); li-- > 0;) {
    const ConvLayer& layer = conv_[li];
    const Tensor& pre = trace.conv_pre[li];
    upstream.shape = pre.shape;
    relu_backward(pre.data.data(), upstream.data.data(), upstream.numel());
    const Tensor& in = trace.conv_in[li];
    const bool need_grad_in = li > 0;
    Tensor grad_in;
    if (need_grad_in) grad_in = Tensor::zeros(in.shape);
    Tensor& gw = grad.tensors[2 * li];
    Tensor& gb = grad.tensors[2 * li + 1];
    conv2d_backward(in.data.data(), n, layer.spec.in_channels, in.dim(2), in.dim(3),
                    layer.weight.data.data(), layer.spec.num_filters, layer.spec.kernel_size,
                    layer.spec.stride, layer.spec.padding, upstream.data.data(),
                    need_grad_in ? grad_in.data.data() : nullptr, gw.data.data(),
                    gb.data.data());
    upstream = std::move(grad_in);
  }

  zero_masked_gradients(grad);
  return loss_value;
}

void Network::zero_masked_gradients(NetGrad& grad) const {
  for (std::size_t li = 0; li < conv_.size(); ++li) {
    const ConvLayer& layer = conv_[li];
    const std::size_t filter_size = layer.weight.numel() / layer.mask.size();
    Tensor& gw = grad.tensors[2 * li];
    Tensor& gb = grad.tensors[2 * li + 1];
    for (std::size_t f = 0; f < layer.mask.size(); ++f) {
      if (layer.mask[f]) continue;
      std::fill(gw.data.begin() + f * filter_size, gw.data.begin() + (f + 1) * filter_size, 0.0);
      gb.data[f] = 0.0;
    }
  }
}

void Network::zero_masked_parameters() {
  for (ConvLayer& layer : conv_) {
    const std::size_t filter_size = layer.weight.numel() / layer.mask.size();
    for (std::size_t f = 0; f < layer.mask.size(); ++f) {
      if (layer.mask[f]) continue;
      std::fill(layer.weight.data.begin() + f * filter_size,
                layer.weight.data.begin() + (f + 1) * filter_size, 0.0);
      layer.bias.data[f] = 0.0;
    }
  }
}

void adam_update(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg,
                 double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double g = grad.data[i];
    state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
    state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m.data[i] / bc1;
    const double vhat = state.v.data[i] / bc2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

NetOptimizer::NetOptimizer(const Network& net, AdamConfig cfg) : config(cfg) {
  for (const Tensor* t : net.parameter_tensors()) {
    states.push_back(AdamState{0, Tensor::zeros(t->shape), Tensor::zeros(t->shape)});
  }
}

double Network::train_step(const Tensor& batch, const std::vector<int>& labels, NetOptimizer& opt,
                           double lr) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  NetGrad grad = make_grad();
  const double loss_value = loss_with_gradient(batch, labels, grad);
  if (!std::isfinite(loss_value)) {
    throw std::runtime_error("train_step: non-finite loss (" + std::to_string(loss_value) + ")");
  }
  std::vector<Tensor*> params = parameter_tensors();
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(*params[i], grad.tensors[i], opt.states[i], opt.config, lr);
  }
  zero_masked_parameters();
  return loss_value;
}

void Network::apply_mask(const Masks& masks) {
  if (masks.size() != conv_.size()) {
    throw std::invalid_argument("expected " + std::to_string(conv_.size()) + " masks, got " +
                                std::to_string(masks.size()));
  }
  for (std::size_t li = 0; li < conv_.size(); ++li) {
    if (masks[li].size() != conv_[li].mask.size()) {
      throw std::invalid_argument("layer " + std::to_string(conv_[li].spec.index) +
                                  ": mask length " + std::to_string(masks[li].size()) +
                                  " != num_filters " + std::to_string(conv_[li].mask.size()));
    }
    for (std::uint8_t m : masks[li]) {
      if (m > 1) throw std::invalid_argument("mask entries must be 0 or 1");
    }
    conv_[li].mask = masks[li];
  }
  zero_masked_parameters();
}

Masks Network::masks() const {
  Masks out;
  for (const ConvLayer& l : conv_) out.push_back(l.mask);
  return out;
}

std::vector<double> Network::get_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Tensor* t : parameter_tensors()) {
    flat.insert(flat.end(), t->data.begin(), t->data.end());
  }
  return flat;
}

void Network::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("parameter vector length mismatch");
  }
  std::size_t off = 0;
  for (Tensor* t : parameter_tensors()) {
    std::copy(flat.begin() + off, flat.begin() + off + t->numel(), t->data.begin());
    off += t->numel();
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameter_tensors()) n += t->numel();
  return n;
}

double evaluate_accuracy(const Network& net, const Tensor& images, const std::vector<int>& labels) {
  const int n = images.dim(0);
  if (n == 0 || labels.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const int c = images.dim(1);
  const int h = images.dim(2);
  const int w = images.dim(3);
  const std::size_t img = static_cast<std::size_t>(c) * h * w;

  const int chunk = 64;
  std::size_t correct = 0;
  for (int start = 0; start < n; start += chunk) {
    const int m = std::min(chunk, n - start);
    Tensor batch = Tensor::zeros({m, c, h, w});
    std::copy(images.data.begin() + start * img, images.data.begin() + (start + m) * img,
              batch.data.begin());
    Tensor logits = net.forward(batch);
    for (int i = 0; i < m; ++i) {
      const double* z = logits.data.data() + static_cast<std::size_t>(i) * net.class_count();
      int best = 0;
      for (int j = 1; j < net.class_count(); ++j) {
        if (z[j] > z[best]) best = j;
      }
      if (best == labels[static_cast<std::size_t>(start + i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / n;
}

}  // namespace crlprune
