#include "crlprune/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace crlprune {

std::string to_string(LayerKind k) { return k == LayerKind::conv ? "conv" : "dense"; }

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv") return LayerKind::conv;
  if (s == "dense") return LayerKind::dense;
  throw std::invalid_argument("unknown layer kind: " + s);
}

void LayerSpec::validate() const {
  if (index < 0) throw std::invalid_argument("layer index must be non-negative");
  if (in_channels <= 0 || num_filters <= 0 || kernel_size <= 0 || stride <= 0 || padding < 0) {
    throw std::invalid_argument("layer " + std::to_string(index) + ": bad dimensions");
  }
  if (kind == LayerKind::dense && (kernel_size != 1 || stride != 1 || padding != 0)) {
    throw std::invalid_argument("layer " + std::to_string(index) +
                                ": dense layers require kernel_size=1, stride=1, padding=0");
  }
}

int conv_out_dim(int in, int kernel, int stride, int padding) {
  int span = in + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

void conv2d_forward(const double* in, int n, int c, int h, int w, const double* weight,
                    const double* bias, int filters, int kernel, int stride, int padding,
                    double* out) {
  const int oh = conv_out_dim(h, kernel, stride, padding);
  const int ow = conv_out_dim(w, kernel, stride, padding);
  const std::size_t in_img = static_cast<std::size_t>(c) * h * w;
  const std::size_t out_img = static_cast<std::size_t>(filters) * oh * ow;

  for (int img = 0; img < n; ++img) {
    const double* x = in + img * in_img;
    double* y = out + img * out_img;
    for (int f = 0; f < filters; ++f) {
      double* yf = y + static_cast<std::size_t>(f) * oh * ow;
      const double b = bias[f];
      for (int i = 0; i < oh * ow; ++i) yf[i] = b;
      for (int ch = 0; ch < c; ++ch) {
        const double* xc = x + static_cast<std::size_t>(ch) * h * w;
        const double* wfc =
            weight + (static_cast<std::size_t>(f) * c + ch) * kernel * kernel;
        for (int kh = 0; kh < kernel; ++kh) {
          for (int kw = 0; kw < kernel; ++kw) {
            const double wv = wfc[kh * kernel + kw];
            if (wv == 0.0) continue;
            for (int i = 0; i < oh; ++i) {
              const int ih = i * stride - padding + kh;
              if (ih < 0 || ih >= h) continue;
              const double* xrow = xc + static_cast<std::size_t>(ih) * w;
              double* yrow = yf + static_cast<std::size_t>(i) * ow;
              for (int j = 0; j < ow; ++j) {
                const int iw = j * stride - padding + kw;
                if (iw < 0 || iw >= w) continue;
                yrow[j] += wv * xrow[iw];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward(const double* in, int n, int c, int h, int w, const double* weight,
                     int filters, int kernel, int stride, int padding, const double* grad_out,
                     double* grad_in, double* grad_weight, double* grad_bias) {
  const int oh = conv_out_dim(h, kernel, stride, padding);
  const int ow = conv_out_dim(w, kernel, stride, padding);
  const std::size_t in_img = static_cast<std::size_t>(c) * h * w;
  const std::size_t out_img = static_cast<std::size_t>(filters) * oh * ow;

  for (int img = 0; img < n; ++img) {
    const double* x = in + img * in_img;
    const double* gy = grad_out + img * out_img;
    double* gx = grad_in ? grad_in + img * in_img : nullptr;
    for (int f = 0; f < filters; ++f) {
      const double* gyf = gy + static_cast<std::size_t>(f) * oh * ow;
      double gb = 0.0;
      for (int i = 0; i < oh * ow; ++i) gb += gyf[i];
      grad_bias[f] += gb;
      for (int ch = 0; ch < c; ++ch) {
        const double* xc = x + static_cast<std::size_t>(ch) * h * w;
        double* gxc = gx ? gx + static_cast<std::size_t>(ch) * h * w : nullptr;
        const double* wfc =
            weight + (static_cast<std::size_t>(f) * c + ch) * kernel * kernel;
        double* gwfc =
            grad_weight + (static_cast<std::size_t>(f) * c + ch) * kernel * kernel;
        for (int kh = 0; kh < kernel; ++kh) {
          for (int kw = 0; kw < kernel; ++kw) {
            const double wv = wfc[kh * kernel + kw];
            double gw = 0.0;
            for (int i = 0; i < oh; ++i) {
              const int ih = i * stride - padding + kh;
              if (ih < 0 || ih >= h) continue;
              const double* xrow = xc + static_cast<std::size_t>(ih) * w;
              double* gxrow = gxc ? gxc + static_cast<std::size_t>(ih) * w : nullptr;
              const double* gyrow = gyf + static_cast<std::size_t>(i) * ow;
              for (int j = 0; j < ow; ++j) {
                const int iw = j * stride - padding + kw;
                if (iw < 0 || iw >= w) continue;
                const double g = gyrow[j];
                gw += g * xrow[iw];
                if (gxrow) gxrow[iw] += wv * g;
              }
            }
            gwfc[kh * kernel + kw] += gw;
          }
        }
      }
    }
  }
}

void dense_forward(const double* in, int n, int in_f, const double* weight, const double* bias,
                   int out_f, double* out) {
  for (int img = 0; img < n; ++img) {
    const double* x = in + static_cast<std::size_t>(img) * in_f;
    double* y = out + static_cast<std::size_t>(img) * out_f;
    for (int o = 0; o < out_f; ++o) {
      const double* wrow = weight + static_cast<std::size_t>(o) * in_f;
      double acc = bias[o];
      for (int i = 0; i < in_f; ++i) acc += wrow[i] * x[i];
      y[o] = acc;
    }
  }
}

void dense_backward(const double* in, int n, int in_f, const double* weight, int out_f,
                    const double* grad_out, double* grad_in, double* grad_weight,
                    double* grad_bias) {
  for (int img = 0; img < n; ++img) {
    const double* x = in + static_cast<std::size_t>(img) * in_f;
    const double* gy = grad_out + static_cast<std::size_t>(img) * out_f;
    double* gx = grad_in ? grad_in + static_cast<std::size_t>(img) * in_f : nullptr;
    for (int o = 0; o < out_f; ++o) {
      const double g = gy[o];
      grad_bias[o] += g;
      const double* wrow = weight + static_cast<std::size_t>(o) * in_f;
      double* gwrow = grad_weight + static_cast<std::size_t>(o) * in_f;
      for (int i = 0; i < in_f; ++i) {
        gwrow[i] += g * x[i];
        if (gx) gx[i] += g * wrow[i];
      }
    }
  }
}

void relu_forward(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] < 0.0) x[i] = 0.0;
  }
}

void relu_backward(const double* pre, double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (pre[i] <= 0.0) grad[i] = 0.0;
  }
}

void tanh_forward(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

void tanh_backward(const double* post, double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) grad[i] *= 1.0 - post[i] * post[i];
}

}  // namespace crlprune
