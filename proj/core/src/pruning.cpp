#include "crlprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace crlprune {

std::vector<double> filter_norms(const Tensor& weight, NormKind kind) {
  if (weight.shape.empty() || weight.shape[0] <= 0) {
    throw std::invalid_argument("filter_norms: weight tensor needs a filter-major leading dim");
  }
  const std::size_t filters = static_cast<std::size_t>(weight.shape[0]);
  const std::size_t slice = weight.numel() / filters;
  std::vector<double> norms(filters, 0.0);
  for (std::size_t f = 0; f < filters; ++f) {
    const double* w = weight.data.data() + f * slice;
    double acc = 0.0;
    if (kind == NormKind::l1) {
      for (std::size_t i = 0; i < slice; ++i) acc += std::fabs(w[i]);
    } else {
      for (std::size_t i = 0; i < slice; ++i) acc += w[i] * w[i];
      acc = std::sqrt(acc);
    }
    norms[f] = acc;
  }
  return norms;
}

std::vector<std::uint8_t> mask_from_sparsity(const std::vector<double>& norms, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("sparsity ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
  const std::size_t n = norms.size();
  if (n == 0) throw std::invalid_argument("mask_from_sparsity: empty norm vector");
  // the epsilon tolerates ratios like 1/3 arriving one ulp below k/n
  auto zeros = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  if (zeros >= n) zeros = n - 1;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&norms](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });

  std::vector<std::uint8_t> mask(n, 1);
  for (std::size_t i = 0; i < zeros; ++i) mask[order[i]] = 0;
  return mask;
}

namespace {

void check_masks(const Network& net, const Masks& masks) {
  const auto& convs = net.conv_layers();
  if (masks.size() != convs.size()) {
    throw std::invalid_argument("expected " + std::to_string(convs.size()) + " masks");
  }
  for (std::size_t t = 0; t < convs.size(); ++t) {
    if (masks[t].size() != static_cast<std::size_t>(convs[t].spec.num_filters)) {
      throw std::invalid_argument("mask length mismatch at layer " +
                                  std::to_string(convs[t].spec.index));
    }
  }
}

int alive_count(const std::vector<std::uint8_t>& mask) {
  int alive = 0;
  for (std::uint8_t m : mask) alive += m ? 1 : 0;
  return alive;
}

}  // namespace

double remaining_param_fraction(const Network& net, const Masks& masks) {
  check_masks(net, masks);
  long long kept = 0;
  long long total = 0;
  for (std::size_t t = 0; t < net.conv_layers().size(); ++t) {
    const ConvLayer& layer = net.conv_layers()[t];
    const long long per_filter =
        static_cast<long long>(layer.spec.in_channels) * layer.spec.kernel_size *
            layer.spec.kernel_size +
        1;  // + bias
    total += per_filter * layer.spec.num_filters;
    kept += per_filter * alive_count(masks[t]);
  }
  for (const DenseLayer& d : net.head()) {
    const long long p = static_cast<long long>(d.in_features) * d.out_features + d.out_features;
    total += p;
    kept += p;
  }
  return 100.0 * static_cast<double>(kept) / static_cast<double>(total);
}

long long mac_count(const Network& net, const std::vector<int>& alive_per_layer) {
  const InputShape in = net.input_shape();
  int h = in.height;
  int w = in.width;
  int alive_in = in.channels;
  long long macs = 0;
  for (std::size_t t = 0; t < net.conv_layers().size(); ++t) {
    const LayerSpec& spec = net.conv_layers()[t].spec;
    const int oh = conv_out_dim(h, spec.kernel_size, spec.stride, spec.padding);
    const int ow = conv_out_dim(w, spec.kernel_size, spec.stride, spec.padding);
    macs += static_cast<long long>(oh) * ow * spec.kernel_size * spec.kernel_size * alive_in *
            alive_per_layer[t];
    h = oh;
    w = ow;
    alive_in = alive_per_layer[t];
  }
  // only the first dense layer shrinks with the conv stack
  const long long features = static_cast<long long>(alive_in) * h * w;
  for (const DenseLayer& d : net.head()) {
    const long long in_f =
        (&d == &net.head().front()) ? features : static_cast<long long>(d.in_features);
    macs += in_f * d.out_features;
  }
  return macs;
}

double flops_fraction(const Network& net, const Masks& masks) {
  check_masks(net, masks);
  std::vector<int> alive;
  std::vector<int> full;
  for (std::size_t t = 0; t < net.conv_layers().size(); ++t) {
    alive.push_back(alive_count(masks[t]));
    full.push_back(net.conv_layers()[t].spec.num_filters);
  }
  const long long masked = mac_count(net, alive);
  const long long unmasked = mac_count(net, full);
  return 100.0 * static_cast<double>(masked) / static_cast<double>(unmasked);
}

}  // namespace crlprune
