#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crlprune {

enum class LayerKind { conv, dense };

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

// Static attributes of one layer; also the raw material of the agent's
// per-layer observation.
struct LayerSpec {
  int index = 0;  // 1-based position in the conv stack
  LayerKind kind = LayerKind::conv;
  int in_channels = 0;
  int num_filters = 0;
  int kernel_size = 1;
  int stride = 1;
  int padding = 0;

  void validate() const;
};

int conv_out_dim(int in, int kernel, int stride, int padding);

// input [n,c,h,w], weight [f,c,k,k], bias [f] -> out [n,f,oh,ow]
void conv2d_forward(const double* in, int n, int c, int h, int w, const double* weight,
                    const double* bias, int filters, int kernel, int stride, int padding,
                    double* out);

// grad_in/grad_weight/grad_bias are accumulated into (callers zero them first);
// grad_in may be null when the input gradient is not needed
void conv2d_backward(const double* in, int n, int c, int h, int w, const double* weight,
                     int filters, int kernel, int stride, int padding, const double* grad_out,
                     double* grad_in, double* grad_weight, double* grad_bias);

// input [n,in_f], weight [out_f,in_f], bias [out_f] -> out [n,out_f]
void dense_forward(const double* in, int n, int in_f, const double* weight, const double* bias,
                   int out_f, double* out);

void dense_backward(const double* in, int n, int in_f, const double* weight, int out_f,
                    const double* grad_out, double* grad_in, double* grad_weight,
                    double* grad_bias);

void relu_forward(double* x, std::size_t n);

// grad *= 1[pre > 0]
void relu_backward(const double* pre, double* grad, std::size_t n);

void tanh_forward(double* x, std::size_t n);

// grad *= 1 - post^2 (post = tanh output)
void tanh_backward(const double* post, double* grad, std::size_t n);

}  // namespace crlprune
