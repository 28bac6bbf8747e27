#pragma once

#include <stdexcept>
#include <string>

namespace hypervq::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key=value run configuration; unknown keys are rejected, CLI flags win.
struct RunConfig {
  std::string quantizer = "hypervq";
  int codebook_size = 16;
  int latent_dim = 3;
  double curvature = 1.0;
  double boundary_eps = 1e-5;
  double beta = 0.25;
  bool kmeans_ema = false;
  double ema_decay = 0.99;
  double tau_max = 2.0;
  double tau_min = 0.5;
  double tau_decay = 0.0;  // 0 = auto: reach tau_min at 70% of total steps
  double learning_rate = 3e-4;
  int batch_size = 128;
  int epochs = 8;
  long steps = 0;  // optional hard cap on optimizer steps; 0 = epochs decide
  unsigned long seed = 1;
  std::string dataset = "digits:train=4096,test=1024";
  std::string out_dir = "runs/out";
  int hidden_channels = 32;
  int num_res_blocks = 2;
  int downsample = 4;
  int device_threads = 1;
  int eval_max_points = 2048;
  int log_every = 10;
  int classifier_epochs = 5;
  int head_channels = 32;
  int head_fc = 64;
  int num_classes = 10;
  double corrupt_rotate_deg = 30.0;
  double corrupt_flip_prob = 0.5;
  double corrupt_sigma = 0.1;

  void validate() const;  // throws ConfigError
};

RunConfig parse_config_file(const std::string& path);
// key=value override, same key set as the file format.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace hypervq::cli
