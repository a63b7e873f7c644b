#pragma once

#include <cstdint>
#include <vector>

#include "crlprune/network.hpp"
#include "crlprune/tensor.hpp"

namespace crlprune {

enum class NormKind { l1, l2 };

// per-filter norm of a [filters, ...] weight tensor
std::vector<double> filter_norms(const Tensor& weight, NormKind kind = NormKind::l1);

// Binary keep-mask with floor(ratio * n) zeros on the smallest-norm filters;
// equal norms are pruned lowest index first. ratio must lie in [0, 1).
std::vector<std::uint8_t> mask_from_sparsity(const std::vector<double>& norms, double ratio);

// percent of parameters kept: surviving conv filters (weights + biases) plus
// the whole head, over the unmasked total
double remaining_param_fraction(const Network& net, const Masks& masks);

// percent of multiply-accumulates kept; a pruned filter removes its own MACs
// and the matching input-channel MACs of the layer after it
double flops_fraction(const Network& net, const Masks& masks);

// MAC count for the network restricted to alive channels; alive_per_layer[t]
// is the surviving filter count of conv layer t
long long mac_count(const Network& net, const std::vector<int>& alive_per_layer);

}  // namespace crlprune
