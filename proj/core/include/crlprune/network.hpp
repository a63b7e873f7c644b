#pragma once

#include <cstdint>
#include <vector>

#include "crlprune/layers.hpp"
#include "crlprune/rng.hpp"
#include "crlprune/tensor.hpp"

namespace crlprune {

// one binary vector per conv layer, length num_filters
using Masks = std::vector<std::vector<std::uint8_t>>;

struct InputShape {
  int channels = 3;
  int height = 8;
  int width = 8;
};

struct ConvSpec {
  int filters = 8;
  int kernel = 3;
  int stride = 1;
  int padding = 0;
};

struct ConvLayer {
  LayerSpec spec;
  Tensor weight;  // [filters, in_channels, k, k]
  Tensor bias;    // [filters]
  std::vector<std::uint8_t> mask;
};

struct DenseLayer {
  int in_features = 0;
  int out_features = 0;
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates for one parameter tensor.
struct AdamState {
  long step = 0;
  Tensor m;
  Tensor v;
};

void adam_update(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg,
                 double lr);

class Network;

// Adam states aligned with Network::parameter_tensors() order.
class NetOptimizer {
 public:
  explicit NetOptimizer(const Network& net, AdamConfig cfg = {});
  AdamConfig config;
  std::vector<AdamState> states;
};

// Gradients mirroring the parameter tensors, same order.
struct NetGrad {
  std::vector<Tensor> tensors;
  void zero();
};

// Convolutional stack plus dense head. Pruning state lives in per-layer
// filter masks; masked filters hold zero weights and receive zero updates,
// so the forward pass needs no mask arithmetic.
class Network {
 public:
  Network(InputShape input, const std::vector<ConvSpec>& convs, const std::vector<int>& hidden,
          int class_count, Rng& rng);

  // logits [n, class_count]
  Tensor forward(const Tensor& batch) const;

  // mean softmax cross-entropy on the batch
  double loss(const Tensor& batch, const std::vector<int>& labels) const;

  // one Adam step; returns the pre-update loss
  double train_step(const Tensor& batch, const std::vector<int>& labels, NetOptimizer& opt,
                    double lr);

  void apply_mask(const Masks& masks);

  const std::vector<ConvLayer>& conv_layers() const { return conv_; }
  const std::vector<DenseLayer>& head() const { return head_; }
  int class_count() const { return class_count_; }
  InputShape input_shape() const { return input_; }
  Masks masks() const;

  // flattened parameter access, conv layers first (weight, bias), then head
  std::vector<double> get_parameters() const;
  void set_parameters(const std::vector<double>& flat);
  std::size_t parameter_count() const;

  NetGrad make_grad() const;

  // gradient of the batch loss, accumulated into grad (masked entries zeroed)
  double loss_with_gradient(const Tensor& batch, const std::vector<int>& labels,
                            NetGrad& grad) const;

  std::vector<Tensor*> parameter_tensors();
  std::vector<const Tensor*> parameter_tensors() const;

 private:
  friend class NetOptimizer;

  Tensor forward_internal(const Tensor& batch, struct ForwardTrace* trace) const;
  void check_batch(const Tensor& batch) const;
  void zero_masked_gradients(NetGrad& grad) const;
  void zero_masked_parameters();

  InputShape input_;
  std::vector<ConvLayer> conv_;
  std::vector<DenseLayer> head_;
  int class_count_ = 0;
  int flat_features_ = 0;
};

// row-wise softmax of logits [n, k]
Tensor softmax_rows(const Tensor& logits);

// mean cross-entropy and, optionally, d(loss)/d(logits)
double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad_logits);

// fraction of argmax-correct predictions; ties resolve to the lowest class
double evaluate_accuracy(const Network& net, const Tensor& images, const std::vector<int>& labels);

}  // namespace crlprune
