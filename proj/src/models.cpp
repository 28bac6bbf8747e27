#include "hypervq/models.hpp"

#include <cmath>

#include "hypervq/metrics.hpp"

namespace hypervq::models {

namespace {

Tensor kaiming_weight(diff::Shape shape, Eigen::Index fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  diff::Array v(diff::numel(shape));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return Tensor::from_values(std::move(shape), std::move(v), /*requires_grad=*/true);
}

}  // namespace

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride_, int padding_, std::mt19937_64& rng)
    : stride(stride_), padding(padding_) {
  weight = kaiming_weight({out_ch, in_ch, kernel, kernel},
                          static_cast<Eigen::Index>(in_ch) * kernel * kernel, rng);
  bias = Tensor::zeros({1, out_ch, 1, 1}, /*requires_grad=*/true);
}

Tensor Conv2d::forward(const Tensor& x) const {
  return diff::conv2d(x, weight, stride, padding) + bias;
}

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride_, int padding_,
                                 std::mt19937_64& rng)
    : stride(stride_), padding(padding_) {
  weight = kaiming_weight({in_ch, out_ch, kernel, kernel},
                          static_cast<Eigen::Index>(in_ch) * kernel * kernel, rng);
  bias = Tensor::zeros({1, out_ch, 1, 1}, /*requires_grad=*/true);
}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
  return diff::conv_transpose2d(x, weight, stride, padding) + bias;
}

Linear::Linear(int in_dim, int out_dim, std::mt19937_64& rng) {
  weight = kaiming_weight({in_dim, out_dim}, in_dim, rng);
  bias = Tensor::zeros({1, out_dim}, /*requires_grad=*/true);
}

Tensor Linear::forward(const Tensor& x) const { return diff::matmul(x, weight) + bias; }

ResidualBlock::ResidualBlock(int channels, std::mt19937_64& rng)
    : conv3(channels, channels, 3, 1, 1, rng), conv1(channels, channels, 1, 1, 0, rng) {}

Tensor ResidualBlock::forward(const Tensor& x) const {
  return x + conv1.forward(diff::relu(conv3.forward(x)));
}

void VQVAEConfig::validate() const {
  if (in_channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("VQVAEConfig: bad input dimensions");
  }
  if (downsample != 2 && downsample != 4) {
    throw std::invalid_argument("VQVAEConfig: downsample must be 2 or 4");
  }
  if (height % downsample != 0 || width % downsample != 0) {
    throw std::invalid_argument("VQVAEConfig: input size not divisible by downsample");
  }
  if (hidden_channels < 2) throw std::invalid_argument("VQVAEConfig: hidden_channels too small");
  if (num_res_blocks < 0) throw std::invalid_argument("VQVAEConfig: negative residual count");
  if (latent_dim < 1) throw std::invalid_argument("VQVAEConfig: latent_dim must be positive");
}

Encoder::Encoder(const VQVAEConfig& cfg, std::mt19937_64& rng) {
  const int stages = cfg.downsample == 4 ? 2 : 1;
  int ch_in = cfg.in_channels;
  for (int s = 0; s < stages; ++s) {
    const int ch_out = (s == stages - 1) ? cfg.hidden_channels : cfg.hidden_channels / 2;
    stages_.emplace_back(ch_in, ch_out, 4, 2, 1, rng);
    ch_in = ch_out;
  }
  for (int b = 0; b < cfg.num_res_blocks; ++b) blocks_.emplace_back(cfg.hidden_channels, rng);
  proj_ = Conv2d(cfg.hidden_channels, cfg.latent_dim, 1, 1, 0, rng);
}

Tensor Encoder::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& stage : stages_) h = diff::relu(stage.forward(h));
  for (const auto& block : blocks_) h = block.forward(h);
  return proj_.forward(h);
}

std::vector<quant::NamedTensor> Encoder::named_parameters(const std::string& prefix) {
  std::vector<quant::NamedTensor> out;
  for (size_t s = 0; s < stages_.size(); ++s) {
    out.push_back({prefix + ".stage" + std::to_string(s) + ".weight", stages_[s].weight});
    out.push_back({prefix + ".stage" + std::to_string(s) + ".bias", stages_[s].bias});
  }
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const std::string base = prefix + ".res" + std::to_string(b);
    out.push_back({base + ".conv3.weight", blocks_[b].conv3.weight});
    out.push_back({base + ".conv3.bias", blocks_[b].conv3.bias});
    out.push_back({base + ".conv1.weight", blocks_[b].conv1.weight});
    out.push_back({base + ".conv1.bias", blocks_[b].conv1.bias});
  }
  out.push_back({prefix + ".proj.weight", proj_.weight});
  out.push_back({prefix + ".proj.bias", proj_.bias});
  return out;
}

Decoder::Decoder(const VQVAEConfig& cfg, std::mt19937_64& rng) {
  proj_ = Conv2d(cfg.latent_dim, cfg.hidden_channels, 1, 1, 0, rng);
  for (int b = 0; b < cfg.num_res_blocks; ++b) blocks_.emplace_back(cfg.hidden_channels, rng);
  const int stages = cfg.downsample == 4 ? 2 : 1;
  int ch_in = cfg.hidden_channels;
  for (int s = 0; s < stages; ++s) {
    const int ch_out = (s == stages - 1) ? cfg.in_channels : cfg.hidden_channels / 2;
    stages_.emplace_back(ch_in, ch_out, 4, 2, 1, rng);
    ch_in = ch_out;
  }
}

Tensor Decoder::forward(const Tensor& z) const {
  Tensor h = proj_.forward(z);
  for (const auto& block : blocks_) h = block.forward(h);
  for (size_t s = 0; s < stages_.size(); ++s) {
    h = stages_[s].forward(h);
    if (s + 1 < stages_.size()) h = diff::relu(h);  // final stage stays linear
  }
  return h;
}

std::vector<quant::NamedTensor> Decoder::named_parameters(const std::string& prefix) {
  std::vector<quant::NamedTensor> out;
  out.push_back({prefix + ".proj.weight", proj_.weight});
  out.push_back({prefix + ".proj.bias", proj_.bias});
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const std::string base = prefix + ".res" + std::to_string(b);
    out.push_back({base + ".conv3.weight", blocks_[b].conv3.weight});
    out.push_back({base + ".conv3.bias", blocks_[b].conv3.bias});
    out.push_back({base + ".conv1.weight", blocks_[b].conv1.weight});
    out.push_back({base + ".conv1.bias", blocks_[b].conv1.bias});
  }
  for (size_t s = 0; s < stages_.size(); ++s) {
    out.push_back({prefix + ".up" + std::to_string(s) + ".weight", stages_[s].weight});
    out.push_back({prefix + ".up" + std::to_string(s) + ".bias", stages_[s].bias});
  }
  return out;
}

VQVAE::VQVAE(const VQVAEConfig& cfg, std::unique_ptr<quant::Quantizer> quantizer,
             std::mt19937_64& rng)
    : cfg_(cfg), quantizer_(std::move(quantizer)) {
  cfg_.validate();
  if (quantizer_->dim() != cfg_.latent_dim) {
    throw std::invalid_argument("VQVAE: quantizer dim does not match latent_dim");
  }
  encoder_ = Encoder(cfg_, rng);
  decoder_ = Decoder(cfg_, rng);
}

Tensor VQVAE::encode(const Tensor& x) const {
  if (x.ndim() != 4 || x.shape()[1] != cfg_.in_channels || x.shape()[2] != cfg_.height ||
      x.shape()[3] != cfg_.width) {
    throw std::invalid_argument("encode: input shape mismatch, got " + diff::shape_str(x.shape()));
  }
  return encoder_.forward(x);
}

Tensor VQVAE::decode(const Tensor& z_q_grid) const {
  if (z_q_grid.ndim() != 4 || z_q_grid.shape()[1] != cfg_.latent_dim) {
    throw std::invalid_argument("decode: latent shape mismatch, got " +
                                diff::shape_str(z_q_grid.shape()));
  }
  return decoder_.forward(z_q_grid);
}

Tensor VQVAE::grid_to_positions(const Tensor& grid) {
  const auto& s = grid.shape();  // [B,d,h,w]
  Tensor nhwc = diff::permute(grid, {0, 2, 3, 1});
  return diff::reshape(nhwc, {s[0] * s[2] * s[3], s[1]});
}

Tensor VQVAE::positions_to_grid(const Tensor& positions, const diff::Shape& grid_shape) {
  Tensor nhwc =
      diff::reshape(positions, {grid_shape[0], grid_shape[2], grid_shape[3], grid_shape[1]});
  return diff::permute(nhwc, {0, 3, 1, 2});
}

VQVAE::ForwardResult VQVAE::forward(const Tensor& x, quant::Mode mode, std::mt19937_64& rng) {
  Tensor z_e = encode(x);
  const diff::Shape grid_shape = z_e.shape();
  quant::QuantizeResult q = quantizer_->forward(grid_to_positions(z_e), mode, rng);
  Tensor z_q_grid = positions_to_grid(q.z_q, grid_shape);
  return {decode(z_q_grid), std::move(q)};
}

std::vector<quant::NamedTensor> VQVAE::named_parameters() {
  std::vector<quant::NamedTensor> out = encoder_.named_parameters("encoder");
  for (auto& nt : quantizer_->named_parameters()) out.push_back(nt);
  for (auto& nt : decoder_.named_parameters("decoder")) out.push_back(nt);
  return out;
}

std::vector<Tensor> VQVAE::parameters() {
  std::vector<Tensor> out;
  for (auto& nt : named_parameters()) out.push_back(nt.tensor);
  return out;
}

void VQVAE::set_trainable(bool trainable) {
  for (auto& p : parameters()) p.set_requires_grad(trainable);
}

StepRecord vqvae_step(VQVAE& model, const Tensor& batch, diff::AdamState& opt,
                      std::mt19937_64& rng) {
  auto fwd = model.forward(batch, quant::Mode::train, rng);
  Tensor recon_loss = diff::mse(fwd.recon, batch);
  Tensor loss = recon_loss + fwd.q.aux_loss;

  StepRecord rec;
  rec.recon = recon_loss.item();
  rec.aux = fwd.q.aux_loss.item();
  rec.loss = loss.item();
  rec.perplexity = metrics::perplexity(fwd.q.usage);
  rec.tau = model.quantizer().temperature();
  if (!std::isfinite(rec.loss)) {
    throw NonFiniteLossError("training loss is not finite (recon=" + std::to_string(rec.recon) +
                             ", aux=" + std::to_string(rec.aux) + ")");
  }

  diff::backward(loss);
  auto params = model.parameters();
  diff::adam_step(params, opt);
  diff::clear_grads(params);
  model.quantizer().post_step(rng);
  return rec;
}

ClassifierHead::ClassifierHead(int latent_dim, int conv_channels, int fc_width, int num_classes,
                               std::mt19937_64& rng)
    : conv_(latent_dim, conv_channels, 3, 1, 1, rng),
      fc1_(conv_channels, fc_width, rng),
      fc2_(fc_width, num_classes, rng),
      num_classes_(num_classes) {}

Tensor ClassifierHead::forward(const Tensor& latent_grid) const {
  Tensor h = diff::relu(conv_.forward(latent_grid));
  h = diff::mean(diff::mean(h, 3, false), 2, false);  // global average pool -> [B,C]
  h = diff::relu(fc1_.forward(h));
  return fc2_.forward(h);
}

std::vector<quant::NamedTensor> ClassifierHead::named_parameters(const std::string& prefix) {
  return {{prefix + ".conv.weight", conv_.weight}, {prefix + ".conv.bias", conv_.bias},
          {prefix + ".fc1.weight", fc1_.weight},   {prefix + ".fc1.bias", fc1_.bias},
          {prefix + ".fc2.weight", fc2_.weight},   {prefix + ".fc2.bias", fc2_.bias}};
}

std::vector<Tensor> ClassifierHead::parameters() {
  std::vector<Tensor> out;
  for (auto& nt : named_parameters("head")) out.push_back(nt.tensor);
  return out;
}

Tensor quantized_latents(VQVAE& backbone, const Tensor& batch, std::mt19937_64& rng,
                         std::vector<int>* indices_out) {
  Tensor z_e = backbone.encode(batch);
  const diff::Shape grid_shape = z_e.shape();
  quant::QuantizeResult q = backbone.quantizer().forward(VQVAE::grid_to_positions(z_e),
                                                         quant::Mode::eval, rng);
  if (indices_out) *indices_out = q.indices;
  return VQVAE::positions_to_grid(q.z_q, grid_shape);
}

ClassifierStepRecord classifier_step(VQVAE& backbone, ClassifierHead& head, const Tensor& batch,
                                     const std::vector<int>& labels, diff::AdamState& opt,
                                     std::mt19937_64& rng) {
  Tensor latents = quantized_latents(backbone, batch, rng);
  Tensor logits = head.forward(latents);
  Tensor loss = diff::cross_entropy(logits, labels);

  ClassifierStepRecord rec;
  rec.loss = loss.item();
  if (!std::isfinite(rec.loss)) throw NonFiniteLossError("classifier loss is not finite");

  const Eigen::Index n = logits.shape()[0], k = logits.shape()[1];
  long correct = 0;
  auto pred = quant::argmax_rows(logits.values(), n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pred[i] == labels[i]) ++correct;
  }
  rec.accuracy = static_cast<double>(correct) / static_cast<double>(n);

  diff::backward(loss);
  for (auto& nt : backbone.named_parameters()) {
    if (nt.tensor.has_grad()) {
      throw std::logic_error("classifier_step: gradient reached frozen parameter " + nt.name);
    }
  }
  auto params = head.parameters();
  diff::adam_step(params, opt);
  diff::clear_grads(params);
  return rec;
}

}  // namespace hypervq::models
