#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hypervq/diff/tensor.hpp"

namespace hypervq::data {

struct ImageDataset {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // N*C*H*W row-major, values in [0,1]
  std::vector<int> labels;     // empty when unlabeled, else one per image
  std::string split;

  Eigen::Index image_numel() const {
    return static_cast<Eigen::Index>(channels) * height * width;
  }
  Eigen::Index size() const {
    return image_numel() == 0 ? 0 : static_cast<Eigen::Index>(pixels.size()) / image_numel();
  }
  bool labeled() const { return !labels.empty(); }

  diff::Tensor batch(const std::vector<Eigen::Index>& ids) const;
  diff::Tensor batch(Eigen::Index begin, Eigen::Index count) const;
  std::vector<int> label_batch(const std::vector<Eigen::Index>& ids) const;
  std::vector<int> label_batch(Eigen::Index begin, Eigen::Index count) const;
};

struct VectorDataset {
  Eigen::MatrixXd points;  // N x d
  std::vector<int> labels;
};

// Big-endian IDX files (magic 0x803 images / 0x801 labels); pixels scale by
// 1/255. Throws on bad magic, truncation, or image/label count mismatch.
ImageDataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      Eigen::Index count, int rows, int cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);
std::vector<std::uint8_t> quantize_pixels(const ImageDataset& ds);  // round(p*255)

// Labeled Gaussian blobs for quantizer/metric oracles.
VectorDataset synth_mixture(int k_clusters, int n_per, int dim, double separation,
                            std::mt19937_64& rng);

// Procedural 28x28 digit glyphs with affine jitter and light noise; stands in
// for handwritten digits when no IDX files are available.
ImageDataset synth_digits(Eigen::Index n, std::mt19937_64& rng, const std::string& split = "");

struct CorruptOps {
  bool rotate = true;
  double max_rotate_deg = 30.0;
  double flip_prob = 0.5;
  double sigma = 0.1;
};

// Random rotation (bilinear, zero fill), horizontal flip, additive Gaussian
// noise clipped back to [0,1]; deterministic given the rng state.
ImageDataset corrupt(const ImageDataset& ds, const CorruptOps& ops, std::mt19937_64& rng);

struct DatasetPair {
  ImageDataset train;
  ImageDataset test;
};

// Spec strings: "digits:train=4096,test=1024", "mnist:dir=PATH[,train=N,test=M]"
// (dir falls back to HYPERVQ_DATA_DIR), "idx:images=P,labels=P[,test_images=P,test_labels=P]".
DatasetPair load_dataset_spec(const std::string& spec, unsigned long seed);

}  // namespace hypervq::data
