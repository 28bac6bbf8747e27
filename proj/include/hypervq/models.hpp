#pragma once

#include <memory>
#include <random>

#include "hypervq/diff/adam.hpp"
#include "hypervq/diff/ops.hpp"
#include "hypervq/quantizers.hpp"

namespace hypervq::models {

using diff::Tensor;

// Loss went non-finite; the CLI maps this to its numerical-failure exit code.
struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Conv2d {
  Tensor weight;  // [OC,IC,kh,kw]
  Tensor bias;    // [1,OC,1,1]
  int stride = 1, padding = 0;

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int padding, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

struct ConvTranspose2d {
  Tensor weight;  // [IC,OC,kh,kw]
  Tensor bias;    // [1,OC,1,1]
  int stride = 1, padding = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int padding,
                  std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

struct Linear {
  Tensor weight;  // [in,out]
  Tensor bias;    // [1,out]

  Linear() = default;
  Linear(int in_dim, int out_dim, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

// y = x + conv1x1(relu(conv3x3(x)))
struct ResidualBlock {
  Conv2d conv3;
  Conv2d conv1;

  ResidualBlock() = default;
  ResidualBlock(int channels, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

struct VQVAEConfig {
  int in_channels = 1;
  int height = 28;
  int width = 28;
  int hidden_channels = 32;  // deepest stage width; earlier stages use half
  int num_res_blocks = 2;
  int latent_dim = 3;
  int downsample = 4;  // 2 or 4, via stride-2 stages

  void validate() const;
  int latent_height() const { return height / downsample; }
  int latent_width() const { return width / downsample; }
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const VQVAEConfig& cfg, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;  // [B,C,H,W] -> [B,d,h,w]
  std::vector<quant::NamedTensor> named_parameters(const std::string& prefix);

 private:
  std::vector<Conv2d> stages_;
  std::vector<ResidualBlock> blocks_;
  Conv2d proj_;
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const VQVAEConfig& cfg, std::mt19937_64& rng);
  Tensor forward(const Tensor& z) const;  // [B,d,h,w] -> [B,C,H,W]
  std::vector<quant::NamedTensor> named_parameters(const std::string& prefix);

 private:
  Conv2d proj_;
  std::vector<ResidualBlock> blocks_;
  std::vector<ConvTranspose2d> stages_;
};

class VQVAE {
 public:
  VQVAE(const VQVAEConfig& cfg, std::unique_ptr<quant::Quantizer> quantizer,
        std::mt19937_64& rng);

  Tensor encode(const Tensor& x) const;
  Tensor decode(const Tensor& z_q_grid) const;

  struct ForwardResult {
    Tensor recon;
    quant::QuantizeResult q;
  };
  ForwardResult forward(const Tensor& x, quant::Mode mode, std::mt19937_64& rng);

  const VQVAEConfig& config() const { return cfg_; }
  quant::Quantizer& quantizer() { return *quantizer_; }
  const quant::Quantizer& quantizer() const { return *quantizer_; }

  std::vector<quant::NamedTensor> named_parameters();
  std::vector<Tensor> parameters();
  void set_trainable(bool trainable);

  static Tensor grid_to_positions(const Tensor& grid);
  static Tensor positions_to_grid(const Tensor& positions, const diff::Shape& grid_shape);

 private:
  VQVAEConfig cfg_;
  Encoder encoder_;
  Decoder decoder_;
  std::unique_ptr<quant::Quantizer> quantizer_;
};

struct StepRecord {
  double loss = 0.0;
  double recon = 0.0;
  double aux = 0.0;
  double perplexity = 0.0;
  double tau = 0.0;
};

// One Algorithm-style training step: forward, MSE + quantizer loss,
// backward, Adam, quantizer maintenance.
StepRecord vqvae_step(VQVAE& model, const Tensor& batch, diff::AdamState& opt,
                      std::mt19937_64& rng);

// conv-relu, global average pooling, two fully connected layers.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(int latent_dim, int conv_channels, int fc_width, int num_classes,
                 std::mt19937_64& rng);
  Tensor forward(const Tensor& latent_grid) const;  // [B,d,h,w] -> [B,classes]
  std::vector<quant::NamedTensor> named_parameters(const std::string& prefix);
  std::vector<Tensor> parameters();
  int num_classes() const { return num_classes_; }

 private:
  Conv2d conv_;
  Linear fc1_;
  Linear fc2_;
  int num_classes_ = 0;
};

struct ClassifierStepRecord {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Backbone (encoder + quantizer) stays frozen; throws if any frozen
// parameter picks up a gradient.
ClassifierStepRecord classifier_step(VQVAE& backbone, ClassifierHead& head, const Tensor& batch,
                                     const std::vector<int>& labels, diff::AdamState& opt,
                                     std::mt19937_64& rng);

// Quantized latent grid of a frozen model, for classifier input.
Tensor quantized_latents(VQVAE& backbone, const Tensor& batch, std::mt19937_64& rng,
                         std::vector<int>* indices_out = nullptr);

}  // namespace hypervq::models
