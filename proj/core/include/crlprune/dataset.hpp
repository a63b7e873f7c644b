#pragma once

#include <string>
#include <vector>

#include "crlprune/rng.hpp"
#include "crlprune/tensor.hpp"

namespace crlprune {

struct Dataset {
  Tensor images;  // [n, c, h, w]
  std::vector<int> labels;
  int class_count = 2;

  int size() const { return images.shape.empty() ? 0 : images.dim(0); }

  // copy of the selected rows, in the given order
  Tensor gather_images(const std::vector<int>& indices) const;
  std::vector<int> gather_labels(const std::vector<int>& indices) const;
};

struct SyntheticSpec {
  int train_size = 512;
  int test_size = 256;
  int channels = 3;
  int height = 8;
  int width = 8;
  int classes = 2;
  double noise = 0.25;   // additive pixel noise stddev
  double jitter = 1.2;   // blob center jitter, pixels
};

// Class-colored Gaussian blobs at class-specific positions: separable but not
// trivially so once noise and jitter are in.
Dataset make_synthetic_dataset(const SyntheticSpec& spec, int count, Rng& rng);

// CIFAR-style binary records: one label byte then channels*height*width
// pixel bytes, scaled to [0, 1]
Dataset load_binary_dataset(const std::string& path, int channels, int height, int width,
                            int classes);

}  // namespace crlprune
