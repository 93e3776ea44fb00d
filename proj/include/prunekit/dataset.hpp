#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

/// Class-templated stand-in for a real image set: each class is a fixed
/// random 3x8x8 template, samples are the template plus Gaussian noise
/// clipped to [-1,1]. Fully determined by the seed.
struct SyntheticDataset {
  Tensor train_images;  // [n_train,3,8,8]
  std::vector<int> train_labels;
  Tensor test_images;  // [n_test,3,8,8]
  std::vector<int> test_labels;
  Tensor templates;  // [C,3,8,8]
  std::uint64_t seed = 0;
  std::size_t classes = 0;
};

namespace detail {

inline void fill_split(Tensor& images, std::vector<int>& labels, const Tensor& templates,
                       std::size_t count, std::size_t classes, double sigma,
                       std::mt19937_64& rng) {
  const std::size_t image = templates.numel() / templates.extent(0);
  std::normal_distribution<double> noise(0.0, sigma);
  labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % classes);
    labels[i] = label;
    const double* tpl = templates.data.data() + static_cast<std::size_t>(label) * image;
    double* dst = images.data.data() + i * image;
    for (std::size_t k = 0; k < image; ++k) {
      const double v = sigma == 0.0 ? tpl[k] : tpl[k] + noise(rng);
      dst[k] = std::clamp(v, -1.0, 1.0);
    }
  }
}

}  // namespace detail

inline SyntheticDataset make_dataset(std::uint64_t seed, std::size_t classes = 10,
                                     std::size_t n_train = 2000, std::size_t n_test = 500,
                                     double sigma = 0.3) {
  if (classes < 2) throw ConfigError("dataset: need at least 2 classes");
  if (n_train == 0 || n_test == 0) throw ConfigError("dataset: splits must be non-empty");

  SyntheticDataset ds;
  ds.seed = seed;
  ds.classes = classes;
  std::mt19937_64 rng(seed);
  ds.templates = Tensor::uniform({classes, 3, 8, 8}, rng);
  ds.train_images = Tensor::zeros({n_train, 3, 8, 8});
  ds.test_images = Tensor::zeros({n_test, 3, 8, 8});
  detail::fill_split(ds.train_images, ds.train_labels, ds.templates, n_train, classes, sigma, rng);
  detail::fill_split(ds.test_images, ds.test_labels, ds.templates, n_test, classes, sigma, rng);
  return ds;
}

/// Gather rows of a [N,...] tensor into a new batch tensor.
inline Tensor gather_batch(const Tensor& images, const std::vector<std::size_t>& indices) {
  const std::size_t image = images.numel() / images.extent(0);
  std::vector<std::size_t> shape = images.shape;
  shape[0] = indices.size();
  Tensor batch{shape};
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy_n(images.data.begin() + indices[i] * image, image,
                batch.data.begin() + i * image);
  return batch;
}

}  // namespace prunekit
