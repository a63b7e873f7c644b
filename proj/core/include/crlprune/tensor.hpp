#pragma once

#include <cstddef>
#include <vector>

namespace crlprune {

// Dense row-major tensor of doubles. Shape is carried explicitly; all math
// kernels index the flat buffer directly.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<int> shape);

  std::size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const;
  void fill(double v);
};

// product of dims; throws on non-positive entries
std::size_t shape_numel(const std::vector<int>& shape);

}  // namespace crlprune
