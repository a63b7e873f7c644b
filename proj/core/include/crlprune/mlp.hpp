#pragma once

#include <span>
#include <vector>

#include "crlprune/network.hpp"
#include "crlprune/rng.hpp"
#include "crlprune/tensor.hpp"

namespace crlprune {

// Small fully connected net with tanh hidden activations and a linear output
// layer, evaluated one state at a time. Backward accumulates into an MlpGrad
// so a caller can sum gradients over a whole rollout before stepping.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> dims, bool zero_init_output, Rng& rng);

  struct Trace {
    std::vector<std::vector<double>> inputs;  // input of each layer
    std::vector<std::vector<double>> post;    // post-activation outputs
  };

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Trace& trace) const;

  // upstream d(loss)/d(output); accumulates parameter grads, returns nothing
  void backward(const Trace& trace, std::span<const double> grad_out,
                std::vector<Tensor>& grad) const;

  std::vector<Tensor> make_grad() const;

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }

  std::vector<Tensor*> parameter_tensors();
  std::vector<const Tensor*> parameter_tensors() const;
  std::vector<double> get_parameters() const;
  void set_parameters(const std::vector<double>& flat);
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

 private:
  std::vector<int> dims_;
  std::vector<DenseLayer> layers_;
};

class MlpOptimizer {
 public:
  explicit MlpOptimizer(const Mlp& mlp, AdamConfig cfg = {});
  void step(Mlp& mlp, const std::vector<Tensor>& grad, double lr);

  AdamConfig config;
  std::vector<AdamState> states;
};

}  // namespace crlprune
