#include "hypervq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

#include "hypervq/data.hpp"
#include "hypervq/models.hpp"

namespace hypervq::metrics {

double perplexity(const std::vector<long>& usage_counts) {
  if (usage_counts.empty()) throw std::invalid_argument("perplexity: empty histogram");
  long total = 0;
  for (long c : usage_counts) {
    if (c < 0) throw std::invalid_argument("perplexity: negative count");
    total += c;
  }
  if (total == 0) throw std::invalid_argument("perplexity: zero total count");
  double entropy = 0.0;
  for (long c : usage_counts) {
    if (c == 0) continue;  // 0 log 0 := 0
    const double p = static_cast<double>(c) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

namespace {

// Cluster sizes keyed by label; also validates >= 2 distinct clusters.
std::map<int, Eigen::Index> cluster_sizes(const ClusterAssignment& assign) {
  if (assign.points.rows() != static_cast<Eigen::Index>(assign.labels.size())) {
    throw std::invalid_argument("clusters: point/label count mismatch");
  }
  if (assign.points.rows() == 0) throw std::invalid_argument("clusters: empty assignment");
  std::map<int, Eigen::Index> sizes;
  for (int l : assign.labels) ++sizes[l];
  if (sizes.size() < 2) throw std::invalid_argument("clusters: need at least 2 clusters");
  return sizes;
}

double pair_distance(const Eigen::MatrixXd& pts, Eigen::Index i, Eigen::Index j,
                     PointMetric metric, double c) {
  if (metric == PointMetric::euclidean) return (pts.row(i) - pts.row(j)).norm();
  return geometry::distance(pts.row(i).transpose(), pts.row(j).transpose(), c);
}

}  // namespace

double silhouette(const ClusterAssignment& assign, PointMetric metric, double curvature) {
  const auto sizes = cluster_sizes(assign);
  const Eigen::Index n = assign.points.rows();

  // mean distance from each point to every cluster
  std::map<int, int> cluster_col;
  for (const auto& [label, sz] : sizes) {
    const int col = static_cast<int>(cluster_col.size());
    cluster_col[label] = col;
  }
  Eigen::MatrixXd mean_dist = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(sizes.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = pair_distance(assign.points, i, j, metric, curvature);
      mean_dist(i, cluster_col.at(assign.labels[j])) += d;
      mean_dist(j, cluster_col.at(assign.labels[i])) += d;
    }
  }

  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = assign.labels[i];
    const Eigen::Index own_size = sizes.at(own);
    if (own_size <= 1) continue;  // singleton scores 0
    const double a = mean_dist(i, cluster_col.at(own)) / static_cast<double>(own_size - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, sz] : sizes) {
      if (label == own) continue;
      b = std::min(b, mean_dist(i, cluster_col.at(label)) / static_cast<double>(sz));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) acc += (b - a) / denom;  // a = b = 0 scores 0
  }
  return acc / static_cast<double>(n);
}

double davies_bouldin(const ClusterAssignment& assign) {
  const auto sizes = cluster_sizes(assign);
  const Eigen::Index n = assign.points.rows();
  const Eigen::Index d = assign.points.cols();
  const Eigen::Index k = static_cast<Eigen::Index>(sizes.size());

  std::map<int, int> cluster_col;
  for (const auto& [label, sz] : sizes) {
    const int col = static_cast<int>(cluster_col.size());
    cluster_col[label] = col;
  }
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(k, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    centroids.row(cluster_col.at(assign.labels[i])) += assign.points.row(i);
  }
  {
    Eigen::Index col = 0;
    for (const auto& [label, sz] : sizes) {
      centroids.row(col) /= static_cast<double>(sz);
      ++col;
    }
  }
  Eigen::VectorXd scatter = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int col = cluster_col.at(assign.labels[i]);
    scatter[col] += (assign.points.row(i) - centroids.row(col)).norm();
  }
  {
    Eigen::Index col = 0;
    for (const auto& [label, sz] : sizes) {
      scatter[col] /= static_cast<double>(sz);
      ++col;
    }
  }

  double acc = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double gap = (centroids.row(i) - centroids.row(j)).norm();
      const double ratio = gap > 0.0 ? (scatter[i] + scatter[j]) / gap
                                     : (scatter[i] + scatter[j] > 0.0
                                            ? std::numeric_limits<double>::infinity()
                                            : 0.0);
      worst = std::max(worst, ratio);
    }
    acc += worst;
  }
  return acc / static_cast<double>(k);
}

double reconstruction_mse(models::VQVAE& model, const data::ImageDataset& dataset, int batch_size,
                          int threads) {
  if (dataset.size() == 0) throw std::invalid_argument("reconstruction_mse: empty dataset");
  const Eigen::Index n = dataset.size();
  const Eigen::Index m = dataset.image_numel();
  std::vector<double> per_image(n, 0.0);

  auto run_range = [&](Eigen::Index begin, Eigen::Index end) {
    std::mt19937_64 rng(0);  // eval path ignores it
    for (Eigen::Index at = begin; at < end; at += batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(batch_size, end - at);
      diff::Tensor batch = dataset.batch(at, count);
      auto fwd = model.forward(batch, quant::Mode::eval, rng);
      const diff::Array& rv = fwd.recon.values();
      const diff::Array& bv = batch.values();
      for (Eigen::Index i = 0; i < count; ++i) {
        per_image[at + i] = (rv.segment(i * m, m) - bv.segment(i * m, m)).square().sum();
      }
    }
  };

  if (threads <= 1) {
    run_range(0, n);
  } else {
    std::vector<std::thread> pool;
    const Eigen::Index chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const Eigen::Index begin = t * chunk;
      const Eigen::Index end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  double total = 0.0;
  for (double s : per_image) total += s;  // fixed-order reduction
  return total / (static_cast<double>(n) * static_cast<double>(m));
}

}  // namespace hypervq::metrics
