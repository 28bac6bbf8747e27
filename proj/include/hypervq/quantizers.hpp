#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hypervq/diff/ops.hpp"
#include "hypervq/geometry_diff.hpp"

namespace hypervq::quant {

enum class Mode { train, eval };

struct NamedTensor {
  std::string name;
  diff::Tensor tensor;
};

// One unidirectional decision hyperplane: trainable normal a (tangent space
// at the origin) and scalar geodesic offset r.
struct HyperbolicHyperplane {
  geometry::TangentVector a;
  double r = 0.0;
};

// tau(j) = max(tau_max * decay^j, tau_min)
struct TemperatureSchedule {
  double tau_max = 2.0;
  double tau_min = 0.5;
  double decay = 0.999;
  long step = 0;

  TemperatureSchedule() = default;
  TemperatureSchedule(double tmax, double tmin, double d);
  double current() const;
  void advance() { ++step; }
};

struct QuantizeResult {
  diff::Tensor z_q;          // [N,d], straight-through wired in train mode
  std::vector<int> indices;  // N code ids in [0,K)
  diff::Tensor logits;       // undefined for the kmeans family
  diff::Tensor aux_loss;     // scalar; zero for the MLR-based quantizers
  std::vector<long> usage;   // K-length selection histogram
};

// ---- Free operations ----

// MLR logits of encoder outputs after projection onto the ball: [N,d] -> [N,K].
diff::Tensor hypervq_logits(const diff::Tensor& z_e, const diff::Tensor& a, const diff::Tensor& r,
                            const geometry::BallConfig& cfg);
diff::Tensor hypervq_logits(const diff::Tensor& z_e, const std::vector<HyperbolicHyperplane>& planes,
                            const geometry::BallConfig& cfg);

// rng == nullptr selects deterministic eval: noise omitted, pure argmax
// one-hot. Otherwise soft = softmax((logits+gumbel)/tau); hard wraps the
// one-hot argmax around it with straight-through gradients.
diff::Tensor gumbel_softmax_sample(const diff::Tensor& logits, double tau, bool hard,
                                   std::mt19937_64* rng);

// Geometric codebook rows r_k * a_k/||a_k||.
Eigen::MatrixXd hypervq_codebook(const Eigen::MatrixXd& a, const Eigen::VectorXd& r);
Eigen::MatrixXd hypervq_codebook(const std::vector<HyperbolicHyperplane>& planes);
diff::Tensor hypervq_codebook_tensor(const diff::Tensor& a, const diff::Tensor& r);

QuantizeResult hypervq_forward(const diff::Tensor& z_e, const diff::Tensor& a,
                               const diff::Tensor& r, TemperatureSchedule& schedule,
                               const geometry::BallConfig& cfg, Mode mode, std::mt19937_64& rng);

// Nearest-neighbor codebook selection with the stop-gradient codebook +
// commitment auxiliary loss (coefficient beta), straight-through to z_e.
QuantizeResult kmeans_quantize(const diff::Tensor& z_e, const diff::Tensor& codebook, double beta);

QuantizeResult gumbelvq_forward(const diff::Tensor& z_e, const diff::Tensor& codebook,
                                const diff::Tensor& proj_w, const diff::Tensor& proj_b,
                                TemperatureSchedule& schedule, Mode mode, std::mt19937_64& rng);

// Codebook lives on the ball; selection by Poincare distance to the
// projected latent, z_q and the auxiliary loss in the origin tangent space.
QuantizeResult hyper_kmeans_quantize(const diff::Tensor& z_e,
                                     const std::vector<geometry::BallPoint>& codebook, double beta);

QuantizeResult hyper_embmat_forward(const diff::Tensor& z_e, const diff::Tensor& a,
                                    const diff::Tensor& r, const diff::Tensor& codebook,
                                    TemperatureSchedule& schedule, const geometry::BallConfig& cfg,
                                    Mode mode, std::mt19937_64& rng);

// Lowest index wins ties everywhere.
std::vector<int> argmax_rows(const diff::Array& v, Eigen::Index n, Eigen::Index k);
diff::Tensor onehot_constant(const std::vector<int>& indices, Eigen::Index k);

// ---- Trainable quantizer modules behind one interface ----

class Quantizer {
 public:
  virtual ~Quantizer() = default;
  virtual QuantizeResult forward(const diff::Tensor& z_e, Mode mode, std::mt19937_64& rng) = 0;
  virtual Eigen::Index codebook_size() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual Eigen::MatrixXd codebook_matrix() const = 0;  // K x d export view
  virtual std::vector<NamedTensor> named_parameters() = 0;
  virtual void post_step(std::mt19937_64& rng) {}  // degenerate-normal guard, EMA
  virtual std::string variant() const = 0;
  virtual double temperature() const { return 0.0; }  // 0 when no Gumbel schedule
};

struct QuantizerOptions {
  Eigen::Index codebook_size = 16;
  Eigen::Index dim = 3;
  geometry::BallConfig ball;
  TemperatureSchedule schedule;
  double beta = 0.25;
  bool kmeans_ema = false;
  double ema_decay = 0.99;
};

// variant: hypervq | kmeansvq | gumbelvq | hyperkmeansvq | hyperembmatvq | identity
std::unique_ptr<Quantizer> make_quantizer(const std::string& variant, const QuantizerOptions& opts,
                                          std::mt19937_64& rng);

class HyperVQQuantizer : public Quantizer {
 public:
  HyperVQQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng);
  QuantizeResult forward(const diff::Tensor& z_e, Mode mode, std::mt19937_64& rng) override;
  Eigen::Index codebook_size() const override { return k_; }
  Eigen::Index dim() const override { return d_; }
  Eigen::MatrixXd codebook_matrix() const override;
  std::vector<NamedTensor> named_parameters() override;
  void post_step(std::mt19937_64& rng) override;
  std::string variant() const override { return "hypervq"; }
  double temperature() const override { return schedule_.current(); }

  const diff::Tensor& normals() const { return a_; }
  const diff::Tensor& offsets() const { return r_; }
  TemperatureSchedule& schedule() { return schedule_; }

 private:
  Eigen::Index k_, d_;
  geometry::BallConfig cfg_;
  TemperatureSchedule schedule_;
  diff::Tensor a_;  // [K,d]
  diff::Tensor r_;  // [K,1]
};

class KmeansQuantizer : public Quantizer {
 public:
  KmeansQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng);
  QuantizeResult forward(const diff::Tensor& z_e, Mode mode, std::mt19937_64& rng) override;
  Eigen::Index codebook_size() const override { return k_; }
  Eigen::Index dim() const override { return d_; }
  Eigen::MatrixXd codebook_matrix() const override;
  std::vector<NamedTensor> named_parameters() override;
  void post_step(std::mt19937_64& rng) override;
  std::string variant() const override { return "kmeansvq"; }

 private:
  Eigen::Index k_, d_;
  double beta_;
  bool ema_;
  double ema_decay_;
  diff::Tensor codebook_;       // [K,d]
  Eigen::VectorXd ema_count_;   // EMA cluster sizes
  Eigen::MatrixXd ema_sum_;     // EMA per-code input sums
  Eigen::VectorXd batch_count_;
  Eigen::MatrixXd batch_sum_;
};

class GumbelVQQuantizer : public Quantizer {
 public:
  GumbelVQQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng);
  QuantizeResult forward(const diff::Tensor& z_e, Mode mode, std::mt19937_64& rng) override;
  Eigen::Index codebook_size() const override { return k_; }
  Eigen::Index dim() const override { return d_; }
  Eigen::MatrixXd codebook_matrix() const override;
  std::vector<NamedTensor> named_parameters() override;
  std::string variant() const override { return "gumbelvq"; }
  double temperature() const override { return schedule_.current(); }

 private:
  Eigen::Index k_, d_;
  TemperatureSchedule schedule_;
  diff::Tensor codebook_;  // [K,d]
  diff::Tensor proj_w_;    // [d,K]
  diff::Tensor proj_b_;    // [1,K]
};

class HyperKmeansQuantizer : public Quantizer {
 public:
  HyperKmeansQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng);
  QuantizeResult forward(const diff::Tensor& z_e, Mode mode, std::mt19937_64& rng) override;
  Eigen::Index codebook_size() const override { return k_; }
  Eigen::Index dim() const override { return d_; }
  Eigen::MatrixXd codebook_matrix() const override;  // tangent rows
  std::vector<NamedTensor> named_parameters() override;
  std::string variant() const override { return "hyperkmeansvq"; }

  std::vector<geometry::BallPoint> ball_codebook() const;

 private:
  Eigen::Index k_, d_;
  geometry::BallConfig cfg_;
  double beta_;
  diff::Tensor tangent_;  // [K,d]; ball points are exp_0(tangent rows)
};

class HyperEmbMatQuantizer : public Quantizer {
 public:
  HyperEmbMatQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng);
  QuantizeResult forward(const diff::Tensor& z_e, Mode mode, std::mt19937_64& rng) override;
  Eigen::Index codebook_size() const override { return k_; }
  Eigen::Index dim() const override { return d_; }
  Eigen::MatrixXd codebook_matrix() const override;
  std::vector<NamedTensor> named_parameters() override;
  void post_step(std::mt19937_64& rng) override;
  std::string variant() const override { return "hyperembmatvq"; }
  double temperature() const override { return schedule_.current(); }

 private:
  Eigen::Index k_, d_;
  geometry::BallConfig cfg_;
  TemperatureSchedule schedule_;
  diff::Tensor a_;
  diff::Tensor r_;
  diff::Tensor codebook_;
};

// Pass-through debug mode: the VQVAE degrades to a plain autoencoder.
class IdentityQuantizer : public Quantizer {
 public:
  explicit IdentityQuantizer(Eigen::Index dim) : d_(dim) {}
  QuantizeResult forward(const diff::Tensor& z_e, Mode mode, std::mt19937_64& rng) override;
  Eigen::Index codebook_size() const override { return 1; }
  Eigen::Index dim() const override { return d_; }
  Eigen::MatrixXd codebook_matrix() const override { return Eigen::MatrixXd::Zero(1, d_); }
  std::vector<NamedTensor> named_parameters() override { return {}; }
  std::string variant() const override { return "identity"; }

 private:
  Eigen::Index d_;
};

}  // namespace hypervq::quant
