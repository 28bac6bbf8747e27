#pragma once

#include <random>

#include "hypervq/config.hpp"
#include "hypervq/data.hpp"
#include "hypervq/models.hpp"

namespace hypervq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

// Subcommands return the process exit code (0 ok, 2 config, 3 numeric).
int cmd_train_vqvae(RunConfig cfg);
int cmd_train_classifier(RunConfig cfg, const std::string& checkpoint_path);
int cmd_eval(RunConfig cfg, const std::string& checkpoint_path, bool dump_embeddings = false);
int cmd_export_codebook(const std::string& checkpoint_path, const std::string& out_path);

int run_cli(int argc, const char* const* argv);

// ---- Building blocks shared with the test suites ----

models::VQVAE build_model(const RunConfig& cfg, std::mt19937_64& rng);
void save_model(const std::string& path, models::VQVAE& model, const RunConfig& cfg);
struct LoadedModel {
  RunConfig cfg;
  std::unique_ptr<models::VQVAE> model;
};
LoadedModel load_model(const std::string& path);

struct EmbeddingSample {
  Eigen::MatrixXd points;   // pre-projection z_e rows
  std::vector<int> codes;   // assigned code per row
  std::vector<long> usage;  // usage histogram over the whole dataset
};
EmbeddingSample collect_embeddings(models::VQVAE& model, const data::ImageDataset& ds,
                                   int max_points, int batch_size = 128);

// tau_decay = 0 resolves to the value reaching tau_min at 70% of total_steps.
double resolve_tau_decay(const RunConfig& cfg, long total_steps);
long total_train_steps(const RunConfig& cfg, Eigen::Index train_size);

}  // namespace hypervq::cli
