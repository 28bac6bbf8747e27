#include "hypervq/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hypervq::quant {

using diff::Array;
using diff::Tensor;

TemperatureSchedule::TemperatureSchedule(double tmax, double tmin, double d)
    : tau_max(tmax), tau_min(tmin), decay(d) {
  if (!(tau_min > 0.0 && tau_min <= tau_max)) {
    throw std::invalid_argument("TemperatureSchedule: need 0 < tau_min <= tau_max");
  }
  if (!(decay > 0.0 && decay < 1.0)) {
    throw std::invalid_argument("TemperatureSchedule: decay must be in (0,1)");
  }
}

double TemperatureSchedule::current() const {
  return std::max(tau_max * std::pow(decay, static_cast<double>(step)), tau_min);
}

std::vector<int> argmax_rows(const Array& v, Eigen::Index n, Eigen::Index k) {
  std::vector<int> out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double bv = v[i * k];
    for (Eigen::Index j = 1; j < k; ++j) {
      if (v[i * k + j] > bv) {
        bv = v[i * k + j];
        best = static_cast<int>(j);
      }
    }
    out[i] = best;
  }
  return out;
}

Tensor onehot_constant(const std::vector<int>& indices, Eigen::Index k) {
  const Eigen::Index n = static_cast<Eigen::Index>(indices.size());
  Array v = Array::Zero(n * k);
  for (Eigen::Index i = 0; i < n; ++i) v[i * k + indices[i]] = 1.0;
  return Tensor::from_values({n, k}, std::move(v));
}

namespace {

std::vector<long> usage_histogram(const std::vector<int>& indices, Eigen::Index k) {
  std::vector<long> usage(k, 0);
  for (int i : indices) ++usage[i];
  return usage;
}

// Mean over rows of the squared row norm of (a - b).
Tensor mean_row_sqdist(const Tensor& a, const Tensor& b) {
  const double n = static_cast<double>(a.shape()[0]);
  return diff::sum(diff::square(a - b)) * (1.0 / n);
}

Tensor gumbel_noise_like(const Tensor& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Array g(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    double u = std::clamp(unif(rng), 1e-12, 1.0 - 1e-12);
    g[i] = -std::log(-std::log(u));
  }
  return Tensor::from_values(t.shape(), std::move(g));
}

}  // namespace

Tensor hypervq_logits(const Tensor& z_e, const Tensor& a, const Tensor& r,
                      const geometry::BallConfig& cfg) {
  Tensor z_h = geometry::safe_project(geometry::exp_map_origin(z_e, cfg.curvature), cfg);
  return geometry::hyperplane_signed_score(z_h, a, r, cfg.curvature);
}

Tensor hypervq_logits(const Tensor& z_e, const std::vector<HyperbolicHyperplane>& planes,
                      const geometry::BallConfig& cfg) {
  if (planes.empty()) throw std::invalid_argument("hypervq_logits: no planes");
  const Eigen::Index k = static_cast<Eigen::Index>(planes.size());
  const Eigen::Index d = planes[0].a.coords.size();
  Array av(k * d), rv(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (planes[i].a.coords.size() != d) {
      throw std::invalid_argument("hypervq_logits: plane dimension mismatch");
    }
    for (Eigen::Index j = 0; j < d; ++j) av[i * d + j] = planes[i].a.coords[j];
    rv[i] = planes[i].r;
  }
  return hypervq_logits(z_e, Tensor::from_values({k, d}, std::move(av)),
                        Tensor::from_values({k, 1}, std::move(rv)), cfg);
}

Tensor gumbel_softmax_sample(const Tensor& logits, double tau, bool hard, std::mt19937_64* rng) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax_sample: tau must be positive");
  const Eigen::Index k = logits.shape().back();
  const Eigen::Index n = logits.size() / k;
  if (rng == nullptr) {
    return onehot_constant(argmax_rows(logits.values(), n, k), k);
  }
  Tensor noisy = (logits + gumbel_noise_like(logits, *rng)) * (1.0 / tau);
  Tensor soft = diff::softmax(noisy, -1);
  if (!hard) return soft;
  Tensor onehot = onehot_constant(argmax_rows(soft.values(), n, k), k);
  return diff::straight_through(onehot, soft);
}

Eigen::MatrixXd hypervq_codebook(const Eigen::MatrixXd& a, const Eigen::VectorXd& r) {
  if (a.rows() != r.size()) throw std::invalid_argument("hypervq_codebook: K mismatch");
  Eigen::MatrixXd rows(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double an = a.row(i).norm();
    if (!(an > 0.0)) throw std::invalid_argument("hypervq_codebook: degenerate normal");
    rows.row(i) = r[i] / an * a.row(i);
  }
  return rows;
}

Eigen::MatrixXd hypervq_codebook(const std::vector<HyperbolicHyperplane>& planes) {
  if (planes.empty()) throw std::invalid_argument("hypervq_codebook: no planes");
  const Eigen::Index k = static_cast<Eigen::Index>(planes.size());
  const Eigen::Index d = planes[0].a.coords.size();
  Eigen::MatrixXd a(k, d);
  Eigen::VectorXd r(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    a.row(i) = planes[i].a.coords;
    r[i] = planes[i].r;
  }
  return hypervq_codebook(a, r);
}

Tensor hypervq_codebook_tensor(const Tensor& a, const Tensor& r) {
  Tensor an = diff::l2_norm(a, -1, true);  // [K,1]
  return diff::reshape(r, {a.shape()[0], 1}) * (a / an);
}

QuantizeResult hypervq_forward(const Tensor& z_e, const Tensor& a, const Tensor& r,
                               TemperatureSchedule& schedule, const geometry::BallConfig& cfg,
                               Mode mode, std::mt19937_64& rng) {
  const Eigen::Index n = z_e.shape()[0];
  const Eigen::Index k = a.shape()[0];
  QuantizeResult res;
  res.logits = hypervq_logits(z_e, a, r, cfg);
  Tensor sel;
  if (mode == Mode::train) {
    sel = gumbel_softmax_sample(res.logits, schedule.current(), /*hard=*/true, &rng);
    schedule.advance();
  } else {
    sel = gumbel_softmax_sample(res.logits, schedule.current(), /*hard=*/true, nullptr);
  }
  res.indices = argmax_rows(sel.values(), n, k);
  res.usage = usage_histogram(res.indices, k);
  res.z_q = diff::matmul(sel, hypervq_codebook_tensor(a, r));
  res.aux_loss = Tensor::scalar(0.0);
  return res;
}

QuantizeResult kmeans_quantize(const Tensor& z_e, const Tensor& codebook, double beta) {
  if (codebook.ndim() != 2 || codebook.shape()[0] < 1) {
    throw std::invalid_argument("kmeans_quantize: empty codebook");
  }
  if (z_e.ndim() != 2 || z_e.shape()[1] != codebook.shape()[1]) {
    throw std::invalid_argument("kmeans_quantize: dimension mismatch");
  }
  const Eigen::Index n = z_e.shape()[0], k = codebook.shape()[0], d = codebook.shape()[1];

  using CMapRM = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  CMapRM Z(z_e.values().data(), n, d), C(codebook.values().data(), k, d);
  QuantizeResult res;
  res.indices.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double bd = (Z.row(i) - C.row(0)).squaredNorm();
    for (Eigen::Index j = 1; j < k; ++j) {
      const double dj = (Z.row(i) - C.row(j)).squaredNorm();
      if (dj < bd) {
        bd = dj;
        best = static_cast<int>(j);
      }
    }
    res.indices[i] = best;
  }
  res.usage = usage_histogram(res.indices, k);
  Tensor onehot = onehot_constant(res.indices, k);
  Tensor selected = diff::matmul(onehot, codebook);  // [N,d], differentiable into codebook
  res.z_q = diff::straight_through(selected, z_e);
  res.aux_loss =
      mean_row_sqdist(z_e.detach(), selected) + beta * mean_row_sqdist(z_e, selected.detach());
  return res;
}

QuantizeResult gumbelvq_forward(const Tensor& z_e, const Tensor& codebook, const Tensor& proj_w,
                                const Tensor& proj_b, TemperatureSchedule& schedule, Mode mode,
                                std::mt19937_64& rng) {
  const Eigen::Index n = z_e.shape()[0], k = codebook.shape()[0];
  QuantizeResult res;
  res.logits = diff::matmul(z_e, proj_w) + proj_b;
  Tensor sel;
  if (mode == Mode::train) {
    sel = gumbel_softmax_sample(res.logits, schedule.current(), /*hard=*/true, &rng);
    schedule.advance();
  } else {
    sel = gumbel_softmax_sample(res.logits, schedule.current(), /*hard=*/true, nullptr);
  }
  res.indices = argmax_rows(sel.values(), n, k);
  res.usage = usage_histogram(res.indices, k);
  res.z_q = diff::matmul(sel, codebook);
  res.aux_loss = Tensor::scalar(0.0);
  return res;
}

QuantizeResult hyper_kmeans_quantize(const Tensor& z_e,
                                     const std::vector<geometry::BallPoint>& codebook,
                                     double beta) {
  if (codebook.empty()) throw std::invalid_argument("hyper_kmeans_quantize: empty codebook");
  const Eigen::Index n = z_e.shape()[0], d = z_e.shape()[1];
  const Eigen::Index k = static_cast<Eigen::Index>(codebook.size());
  const geometry::BallConfig cfg = codebook[0].config;
  for (const auto& p : codebook) {
    if (p.coords.size() != d || !(p.config == cfg)) {
      throw std::invalid_argument("hyper_kmeans_quantize: inconsistent codebook");
    }
  }
  Eigen::MatrixXd tangent_rows(k, d);
  for (Eigen::Index j = 0; j < k; ++j) {
    tangent_rows.row(j) = geometry::log_map_origin(codebook[j].coords, cfg.curvature);
  }

  QuantizeResult res;
  res.indices.resize(n);
  Array selected_v(n * d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd ze_row = Eigen::Map<const Eigen::VectorXd>(z_e.values().data() + i * d, d);
    Eigen::VectorXd z_h =
        geometry::safe_project(geometry::exp_map_origin(ze_row, cfg.curvature), cfg);
    int best = 0;
    double bd = geometry::distance(z_h, codebook[0].coords, cfg.curvature);
    for (Eigen::Index j = 1; j < k; ++j) {
      const double dj = geometry::distance(z_h, codebook[j].coords, cfg.curvature);
      if (dj < bd) {
        bd = dj;
        best = static_cast<int>(j);
      }
    }
    res.indices[i] = best;
    for (Eigen::Index c = 0; c < d; ++c) selected_v[i * d + c] = tangent_rows(best, c);
  }
  res.usage = usage_histogram(res.indices, k);
  Tensor selected = Tensor::from_values({n, d}, std::move(selected_v));
  res.z_q = diff::straight_through(selected, z_e);
  res.aux_loss = mean_row_sqdist(z_e.detach(), selected) + beta * mean_row_sqdist(z_e, selected);
  return res;
}

QuantizeResult hyper_embmat_forward(const Tensor& z_e, const Tensor& a, const Tensor& r,
                                    const Tensor& codebook, TemperatureSchedule& schedule,
                                    const geometry::BallConfig& cfg, Mode mode,
                                    std::mt19937_64& rng) {
  const Eigen::Index n = z_e.shape()[0], k = a.shape()[0];
  QuantizeResult res;
  res.logits = hypervq_logits(z_e, a, r, cfg);
  Tensor sel;
  if (mode == Mode::train) {
    sel = gumbel_softmax_sample(res.logits, schedule.current(), /*hard=*/true, &rng);
    schedule.advance();
  } else {
    sel = gumbel_softmax_sample(res.logits, schedule.current(), /*hard=*/true, nullptr);
  }
  res.indices = argmax_rows(sel.values(), n, k);
  res.usage = usage_histogram(res.indices, k);
  res.z_q = diff::matmul(sel, codebook);
  res.aux_loss = Tensor::scalar(0.0);
  return res;
}

// ---- Modules ----

namespace {

Tensor normal_param(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Array v(rows * cols);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return Tensor::from_values({rows, cols}, std::move(v), /*requires_grad=*/true);
}

Tensor uniform_param(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Array v(rows * cols);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = unif(rng);
  return Tensor::from_values({rows, cols}, std::move(v), /*requires_grad=*/true);
}

void check_quantizer_options(const QuantizerOptions& opts) {
  if (opts.codebook_size < 2) throw std::invalid_argument("quantizer: codebook needs K >= 2");
  if (opts.dim < 1) throw std::invalid_argument("quantizer: latent dim must be positive");
}

}  // namespace

HyperVQQuantizer::HyperVQQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng)
    : k_(opts.codebook_size), d_(opts.dim), cfg_(opts.ball), schedule_(opts.schedule) {
  check_quantizer_options(opts);
  a_ = normal_param(k_, d_, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
  r_ = uniform_param(k_, 1, -0.1, 0.1, rng);
}

QuantizeResult HyperVQQuantizer::forward(const Tensor& z_e, Mode mode, std::mt19937_64& rng) {
  return hypervq_forward(z_e, a_, r_, schedule_, cfg_, mode, rng);
}

Eigen::MatrixXd HyperVQQuantizer::codebook_matrix() const {
  using CMapRM =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  Eigen::MatrixXd a = CMapRM(a_.values().data(), k_, d_);
  Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(r_.values().data(), k_);
  return hypervq_codebook(a, r);
}

std::vector<NamedTensor> HyperVQQuantizer::named_parameters() {
  return {{"quantizer.normals", a_}, {"quantizer.offsets", r_}};
}

void HyperVQQuantizer::post_step(std::mt19937_64& rng) {
  // Eq-6-style logits divide by ||a_k||; re-seed any normal that underflowed.
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_)));
  for (Eigen::Index i = 0; i < k_; ++i) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < d_; ++j) {
      const double v = a_.values()[i * d_ + j];
      sq += v * v;
    }
    if (std::sqrt(sq) < 1e-8) {
      for (Eigen::Index j = 0; j < d_; ++j) a_.values()[i * d_ + j] = normal(rng);
    }
  }
}

KmeansQuantizer::KmeansQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng)
    : k_(opts.codebook_size),
      d_(opts.dim),
      beta_(opts.beta),
      ema_(opts.kmeans_ema),
      ema_decay_(opts.ema_decay) {
  check_quantizer_options(opts);
  codebook_ = normal_param(k_, d_, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
  if (ema_) {
    codebook_.set_requires_grad(false);
    ema_count_ = Eigen::VectorXd::Ones(k_);
    using CMapRM =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    ema_sum_ = CMapRM(codebook_.values().data(), k_, d_);
  }
}

QuantizeResult KmeansQuantizer::forward(const Tensor& z_e, Mode mode, std::mt19937_64& rng) {
  (void)rng;
  QuantizeResult res = kmeans_quantize(z_e, codebook_, beta_);
  if (ema_) {
    // codebook learns by EMA cluster statistics, not by the dictionary loss
    res.aux_loss = beta_ * mean_row_sqdist(z_e, diff::matmul(onehot_constant(res.indices, k_),
                                                             codebook_)
                                                    .detach());
    if (mode == Mode::train) {
      const Eigen::Index n = z_e.shape()[0];
      batch_count_ = Eigen::VectorXd::Zero(k_);
      batch_sum_ = Eigen::MatrixXd::Zero(k_, d_);
      for (Eigen::Index i = 0; i < n; ++i) {
        batch_count_[res.indices[i]] += 1.0;
        for (Eigen::Index c = 0; c < d_; ++c) {
          batch_sum_(res.indices[i], c) += z_e.values()[i * d_ + c];
        }
      }
    }
  }
  return res;
}

Eigen::MatrixXd KmeansQuantizer::codebook_matrix() const {
  using CMapRM =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  return CMapRM(codebook_.values().data(), k_, d_);
}

std::vector<NamedTensor> KmeansQuantizer::named_parameters() {
  return {{"quantizer.codebook", codebook_}};
}

void KmeansQuantizer::post_step(std::mt19937_64& rng) {
  (void)rng;
  if (!ema_ || batch_count_.size() == 0) return;
  ema_count_ = ema_decay_ * ema_count_ + (1.0 - ema_decay_) * batch_count_;
  ema_sum_ = ema_decay_ * ema_sum_ + (1.0 - ema_decay_) * batch_sum_;
  const double total = ema_count_.sum();
  for (Eigen::Index i = 0; i < k_; ++i) {
    // Laplace-smoothed cluster size keeps dead codes finite
    const double size = (ema_count_[i] + 1e-5) / (total + 1e-5 * static_cast<double>(k_)) * total;
    for (Eigen::Index c = 0; c < d_; ++c) codebook_.values()[i * d_ + c] = ema_sum_(i, c) / size;
  }
  batch_count_.resize(0);
}

GumbelVQQuantizer::GumbelVQQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng)
    : k_(opts.codebook_size), d_(opts.dim), schedule_(opts.schedule) {
  check_quantizer_options(opts);
  codebook_ = normal_param(k_, d_, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
  proj_w_ = normal_param(d_, k_, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
  proj_b_ = Tensor::zeros({1, k_}, /*requires_grad=*/true);
}

QuantizeResult GumbelVQQuantizer::forward(const Tensor& z_e, Mode mode, std::mt19937_64& rng) {
  return gumbelvq_forward(z_e, codebook_, proj_w_, proj_b_, schedule_, mode, rng);
}

Eigen::MatrixXd GumbelVQQuantizer::codebook_matrix() const {
  using CMapRM =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  return CMapRM(codebook_.values().data(), k_, d_);
}

std::vector<NamedTensor> GumbelVQQuantizer::named_parameters() {
  return {{"quantizer.codebook", codebook_},
          {"quantizer.proj_w", proj_w_},
          {"quantizer.proj_b", proj_b_}};
}

HyperKmeansQuantizer::HyperKmeansQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng)
    : k_(opts.codebook_size), d_(opts.dim), cfg_(opts.ball), beta_(opts.beta) {
  check_quantizer_options(opts);
  tangent_ = normal_param(k_, d_, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
}

std::vector<geometry::BallPoint> HyperKmeansQuantizer::ball_codebook() const {
  std::vector<geometry::BallPoint> pts;
  pts.reserve(k_);
  for (Eigen::Index i = 0; i < k_; ++i) {
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(tangent_.values().data() + i * d_, d_);
    pts.push_back(geometry::safe_project_point(geometry::exp_map_origin(t, cfg_.curvature), cfg_));
  }
  return pts;
}

QuantizeResult HyperKmeansQuantizer::forward(const Tensor& z_e, Mode mode, std::mt19937_64& rng) {
  (void)mode;
  (void)rng;
  const Eigen::Index n = z_e.shape()[0];
  const std::vector<geometry::BallPoint> points = ball_codebook();

  QuantizeResult res;
  res.indices.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd ze_row = Eigen::Map<const Eigen::VectorXd>(z_e.values().data() + i * d_, d_);
    Eigen::VectorXd z_h =
        geometry::safe_project(geometry::exp_map_origin(ze_row, cfg_.curvature), cfg_);
    int best = 0;
    double bd = geometry::distance(z_h, points[0].coords, cfg_.curvature);
    for (Eigen::Index j = 1; j < k_; ++j) {
      const double dj = geometry::distance(z_h, points[j].coords, cfg_.curvature);
      if (dj < bd) {
        bd = dj;
        best = static_cast<int>(j);
      }
    }
    res.indices[i] = best;
  }
  res.usage = usage_histogram(res.indices, k_);
  // z_q and both loss terms live in the origin tangent space, where the
  // parameterization makes log_0(C_k) exactly the tangent row.
  Tensor selected = diff::matmul(onehot_constant(res.indices, k_), tangent_);
  res.z_q = diff::straight_through(selected.detach(), z_e);
  res.aux_loss =
      mean_row_sqdist(z_e.detach(), selected) + beta_ * mean_row_sqdist(z_e, selected.detach());
  return res;
}

Eigen::MatrixXd HyperKmeansQuantizer::codebook_matrix() const {
  using CMapRM =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  return CMapRM(tangent_.values().data(), k_, d_);
}

std::vector<NamedTensor> HyperKmeansQuantizer::named_parameters() {
  return {{"quantizer.tangent_codebook", tangent_}};
}

HyperEmbMatQuantizer::HyperEmbMatQuantizer(const QuantizerOptions& opts, std::mt19937_64& rng)
    : k_(opts.codebook_size), d_(opts.dim), cfg_(opts.ball), schedule_(opts.schedule) {
  check_quantizer_options(opts);
  a_ = normal_param(k_, d_, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
  r_ = uniform_param(k_, 1, -0.1, 0.1, rng);
  codebook_ = normal_param(k_, d_, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
}

QuantizeResult HyperEmbMatQuantizer::forward(const Tensor& z_e, Mode mode, std::mt19937_64& rng) {
  return hyper_embmat_forward(z_e, a_, r_, codebook_, schedule_, cfg_, mode, rng);
}

Eigen::MatrixXd HyperEmbMatQuantizer::codebook_matrix() const {
  using CMapRM =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  return CMapRM(codebook_.values().data(), k_, d_);
}

std::vector<NamedTensor> HyperEmbMatQuantizer::named_parameters() {
  return {{"quantizer.normals", a_},
          {"quantizer.offsets", r_},
          {"quantizer.codebook", codebook_}};
}

void HyperEmbMatQuantizer::post_step(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_)));
  for (Eigen::Index i = 0; i < k_; ++i) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < d_; ++j) {
      const double v = a_.values()[i * d_ + j];
      sq += v * v;
    }
    if (std::sqrt(sq) < 1e-8) {
      for (Eigen::Index j = 0; j < d_; ++j) a_.values()[i * d_ + j] = normal(rng);
    }
  }
}

QuantizeResult IdentityQuantizer::forward(const Tensor& z_e, Mode mode, std::mt19937_64& rng) {
  (void)mode;
  (void)rng;
  QuantizeResult res;
  res.z_q = z_e;
  res.indices.assign(z_e.shape()[0], 0);
  res.usage = {static_cast<long>(z_e.shape()[0])};
  res.aux_loss = Tensor::scalar(0.0);
  return res;
}

std::unique_ptr<Quantizer> make_quantizer(const std::string& variant, const QuantizerOptions& opts,
                                          std::mt19937_64& rng) {
  if (variant == "hypervq") return std::make_unique<HyperVQQuantizer>(opts, rng);
  if (variant == "kmeansvq") return std::make_unique<KmeansQuantizer>(opts, rng);
  if (variant == "gumbelvq") return std::make_unique<GumbelVQQuantizer>(opts, rng);
  if (variant == "hyperkmeansvq") return std::make_unique<HyperKmeansQuantizer>(opts, rng);
  if (variant == "hyperembmatvq") return std::make_unique<HyperEmbMatQuantizer>(opts, rng);
  if (variant == "identity") return std::make_unique<IdentityQuantizer>(opts.dim);
  throw std::invalid_argument("unknown quantizer variant: " + variant);
}

}  // namespace hypervq::quant
