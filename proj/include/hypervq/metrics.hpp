#pragma once

#include <Eigen/Dense>

#include <vector>

#include "hypervq/geometry.hpp"

namespace hypervq::data {
struct ImageDataset;
}
namespace hypervq::models {
class VQVAE;
}

namespace hypervq::metrics {

struct ClusterAssignment {
  Eigen::MatrixXd points;   // N x d
  std::vector<int> labels;  // N cluster ids
};

enum class PointMetric { euclidean, poincare };

// Exponentiated Shannon entropy of empirical code usage, in [1, K].
double perplexity(const std::vector<long>& usage_counts);

// Mean (b-a)/max(a,b); singleton clusters score 0, as does a degenerate
// a = b = 0 point. Requires >= 2 distinct clusters.
double silhouette(const ClusterAssignment& assign,
                  PointMetric metric = PointMetric::euclidean, double curvature = 1.0);

// Mean over clusters of max_j (S_i+S_j)/M_ij; coincident centroids with
// nonzero scatter yield +inf for that pair.
double davies_bouldin(const ClusterAssignment& assign);

// Dataset-mean per-pixel squared reconstruction error in eval mode.
// threads > 1 shards batches; per-image sums merge in index order.
double reconstruction_mse(models::VQVAE& model, const data::ImageDataset& dataset,
                          int batch_size = 128, int threads = 1);

}  // namespace hypervq::metrics
