#include "crlprune/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace crlprune {

Tensor Dataset::gather_images(const std::vector<int>& indices) const {
  const int c = images.dim(1);
  const int h = images.dim(2);
  const int w = images.dim(3);
  const std::size_t img = static_cast<std::size_t>(c) * h * w;
  Tensor out = Tensor::zeros({static_cast<int>(indices.size()), c, h, w});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = static_cast<std::size_t>(indices[i]) * img;
    std::copy(images.data.begin() + src, images.data.begin() + src + img,
              out.data.begin() + i * img);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(const std::vector<int>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(labels[static_cast<std::size_t>(i)]);
  return out;
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec, int count, Rng& rng) {
  if (count <= 0) throw std::invalid_argument("dataset size must be positive");
  Dataset ds;
  ds.class_count = spec.classes;
  ds.images = Tensor::zeros({count, spec.channels, spec.height, spec.width});
  ds.labels.resize(static_cast<std::size_t>(count));

  const std::size_t img = static_cast<std::size_t>(spec.channels) * spec.height * spec.width;
  const double sigma = 1.5;

  for (int i = 0; i < count; ++i) {
    const int label = i % spec.classes;
    ds.labels[static_cast<std::size_t>(i)] = label;

    // class anchors spread along the diagonal
    const double frac = spec.classes == 1 ? 0.5
                                          : static_cast<double>(label) /
                                                static_cast<double>(spec.classes - 1);
    const double cy = 0.25 * spec.height + 0.5 * spec.height * frac +
                      rng.uniform(-spec.jitter, spec.jitter);
    const double cx = 0.25 * spec.width + 0.5 * spec.width * frac +
                      rng.uniform(-spec.jitter, spec.jitter);

    double* base = ds.images.data.data() + static_cast<std::size_t>(i) * img;
    for (int ch = 0; ch < spec.channels; ++ch) {
      // each class tints a different channel most strongly
      const int favored = label % spec.channels;
      const double amp = ch == favored ? 1.0 : 0.35;
      double* plane = base + static_cast<std::size_t>(ch) * spec.height * spec.width;
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          plane[y * spec.width + x] =
              amp * std::exp(-d2 / (2.0 * sigma * sigma)) + spec.noise * rng.normal();
        }
      }
    }
  }
  return ds;
}

Dataset load_binary_dataset(const std::string& path, int channels, int height, int width,
                            int classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  const std::size_t pixels = static_cast<std::size_t>(channels) * height * width;
  std::vector<unsigned char> record(1 + pixels);

  std::vector<double> data;
  std::vector<int> labels;
  while (in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record.size()))) {
    const int label = record[0];
    if (label < 0 || label >= classes) {
      throw std::runtime_error("dataset record has label " + std::to_string(label) +
                               " outside [0, " + std::to_string(classes) + ")");
    }
    labels.push_back(label);
    for (std::size_t i = 0; i < pixels; ++i) data.push_back(record[1 + i] / 255.0);
  }
  if (in.gcount() != 0 && static_cast<std::size_t>(in.gcount()) != record.size()) {
    throw std::runtime_error("dataset file truncated mid-record: " + path);
  }
  if (labels.empty()) throw std::runtime_error("dataset file holds no records: " + path);

  Dataset ds;
  ds.class_count = classes;
  ds.labels = std::move(labels);
  ds.images = Tensor({static_cast<int>(ds.labels.size()), channels, height, width},
                     std::move(data));
  return ds;
}

}  // namespace crlprune
