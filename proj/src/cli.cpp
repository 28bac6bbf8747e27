#include "hypervq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "hypervq/checkpoint.hpp"
#include "hypervq/metrics.hpp"

#include "CLI11.hpp"

namespace hypervq::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

quant::QuantizerOptions quantizer_options(const RunConfig& cfg) {
  quant::QuantizerOptions opts;
  opts.codebook_size = cfg.codebook_size;
  opts.dim = cfg.latent_dim;
  opts.ball = geometry::BallConfig(cfg.curvature, cfg.boundary_eps);
  const double decay = cfg.tau_decay > 0.0 ? cfg.tau_decay : 0.999;
  opts.schedule = quant::TemperatureSchedule(cfg.tau_max, cfg.tau_min, decay);
  opts.beta = cfg.beta;
  opts.kmeans_ema = cfg.kmeans_ema;
  opts.ema_decay = cfg.ema_decay;
  return opts;
}

models::VQVAEConfig model_config(const RunConfig& cfg, const data::ImageDataset* ds) {
  models::VQVAEConfig mc;
  if (ds != nullptr) {
    mc.in_channels = ds->channels;
    mc.height = ds->height;
    mc.width = ds->width;
  }
  mc.hidden_channels = cfg.hidden_channels;
  mc.num_res_blocks = cfg.num_res_blocks;
  mc.latent_dim = cfg.latent_dim;
  mc.downsample = cfg.downsample;
  return mc;
}

struct MetricsRow {
  std::string name;
  double value;
  std::string tags;
};

void write_metrics(std::ostream& out, const std::vector<MetricsRow>& rows) {
  for (const auto& r : rows) {
    out << r.name << " " << fmt(r.value) << (r.tags.empty() ? "" : " " + r.tags) << "\n";
  }
}

}  // namespace

long total_train_steps(const RunConfig& cfg, Eigen::Index train_size) {
  const long batches = (train_size + cfg.batch_size - 1) / cfg.batch_size;
  long total = static_cast<long>(cfg.epochs) * batches;
  if (cfg.steps > 0) total = std::min(total, cfg.steps);
  return total;
}

double resolve_tau_decay(const RunConfig& cfg, long total_steps) {
  if (cfg.tau_decay > 0.0) return cfg.tau_decay;
  if (cfg.tau_min >= cfg.tau_max) return 0.999;
  const double horizon = std::max(1.0, 0.7 * static_cast<double>(total_steps));
  return std::pow(cfg.tau_min / cfg.tau_max, 1.0 / horizon);
}

models::VQVAE build_model(const RunConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  models::VQVAEConfig mc = model_config(cfg, nullptr);
  auto quantizer = quant::make_quantizer(cfg.quantizer, quantizer_options(cfg), rng);
  return models::VQVAE(mc, std::move(quantizer), rng);
}

void save_model(const std::string& path, models::VQVAE& model, const RunConfig& cfg) {
  std::map<std::string, std::string> meta;
  meta["format"] = "vqvae";
  meta["quantizer"] = cfg.quantizer;
  meta["codebook_size"] = std::to_string(cfg.codebook_size);
  meta["latent_dim"] = std::to_string(cfg.latent_dim);
  meta["curvature"] = fmt_full(cfg.curvature);
  meta["boundary_eps"] = fmt_full(cfg.boundary_eps);
  meta["beta"] = fmt_full(cfg.beta);
  meta["kmeans_ema"] = cfg.kmeans_ema ? "1" : "0";
  meta["ema_decay"] = fmt_full(cfg.ema_decay);
  meta["tau_max"] = fmt_full(cfg.tau_max);
  meta["tau_min"] = fmt_full(cfg.tau_min);
  meta["tau_decay"] = fmt_full(cfg.tau_decay);
  meta["hidden_channels"] = std::to_string(cfg.hidden_channels);
  meta["num_res_blocks"] = std::to_string(cfg.num_res_blocks);
  meta["downsample"] = std::to_string(cfg.downsample);
  meta["in_channels"] = std::to_string(model.config().in_channels);
  meta["height"] = std::to_string(model.config().height);
  meta["width"] = std::to_string(model.config().width);

  std::vector<io::NamedTensorRef> refs;
  for (auto& nt : model.named_parameters()) {
    refs.push_back({nt.name, nt.tensor.shape(), &nt.tensor.values()});
  }
  io::save_checkpoint(path, refs, meta);
}

LoadedModel load_model(const std::string& path) {
  io::Checkpoint ckpt = io::load_checkpoint(path);
  auto need = [&](const std::string& key) -> std::string {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw ConfigError("checkpoint: missing meta key " + key);
    return it->second;
  };
  if (need("format") != "vqvae") throw ConfigError("checkpoint: not a vqvae checkpoint");

  LoadedModel lm;
  lm.cfg.quantizer = need("quantizer");
  lm.cfg.codebook_size = std::stoi(need("codebook_size"));
  lm.cfg.latent_dim = std::stoi(need("latent_dim"));
  lm.cfg.curvature = std::stod(need("curvature"));
  lm.cfg.boundary_eps = std::stod(need("boundary_eps"));
  lm.cfg.beta = std::stod(need("beta"));
  lm.cfg.kmeans_ema = need("kmeans_ema") == "1";
  lm.cfg.ema_decay = std::stod(need("ema_decay"));
  lm.cfg.tau_max = std::stod(need("tau_max"));
  lm.cfg.tau_min = std::stod(need("tau_min"));
  lm.cfg.tau_decay = std::stod(need("tau_decay"));
  lm.cfg.hidden_channels = std::stoi(need("hidden_channels"));
  lm.cfg.num_res_blocks = std::stoi(need("num_res_blocks"));
  lm.cfg.downsample = std::stoi(need("downsample"));

  std::mt19937_64 rng(0);
  models::VQVAEConfig mc = model_config(lm.cfg, nullptr);
  mc.in_channels = std::stoi(need("in_channels"));
  mc.height = std::stoi(need("height"));
  mc.width = std::stoi(need("width"));
  auto quantizer = quant::make_quantizer(lm.cfg.quantizer, quantizer_options(lm.cfg), rng);
  lm.model = std::make_unique<models::VQVAE>(mc, std::move(quantizer), rng);

  for (auto& nt : lm.model->named_parameters()) {
    if (!ckpt.has(nt.name)) throw ConfigError("checkpoint: missing tensor " + nt.name);
    if (ckpt.shape(nt.name) != nt.tensor.shape()) {
      throw ConfigError("checkpoint: shape mismatch for " + nt.name);
    }
    nt.tensor.values() = ckpt.values(nt.name);
  }
  return lm;
}

EmbeddingSample collect_embeddings(models::VQVAE& model, const data::ImageDataset& ds,
                                   int max_points, int batch_size) {
  const Eigen::Index n = ds.size();
  const Eigen::Index hw = static_cast<Eigen::Index>(model.config().latent_height()) *
                          model.config().latent_width();
  const Eigen::Index d = model.config().latent_dim;
  const Eigen::Index total = n * hw;

  Eigen::MatrixXd all_points(total, d);
  std::vector<int> all_codes(total);
  std::vector<long> usage(model.quantizer().codebook_size(), 0);
  std::mt19937_64 rng(0);

  for (Eigen::Index at = 0; at < n; at += batch_size) {
    const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - at);
    diff::Tensor batch = ds.batch(at, count);
    diff::Tensor z_e = model.encode(batch);
    diff::Tensor pos = models::VQVAE::grid_to_positions(z_e);
    quant::QuantizeResult q = model.quantizer().forward(pos, quant::Mode::eval, rng);
    for (Eigen::Index i = 0; i < count * hw; ++i) {
      for (Eigen::Index c = 0; c < d; ++c) all_points(at * hw + i, c) = pos.values()[i * d + c];
      all_codes[at * hw + i] = q.indices[i];
      ++usage[q.indices[i]];
    }
  }

  const Eigen::Index keep = std::min<Eigen::Index>(max_points, total);
  const Eigen::Index stride = std::max<Eigen::Index>(1, total / keep);
  EmbeddingSample out;
  out.usage = std::move(usage);
  std::vector<Eigen::Index> picks;
  for (Eigen::Index i = 0; i < total && static_cast<Eigen::Index>(picks.size()) < keep;
       i += stride) {
    picks.push_back(i);
  }
  out.points.resize(static_cast<Eigen::Index>(picks.size()), d);
  out.codes.resize(picks.size());
  for (size_t i = 0; i < picks.size(); ++i) {
    out.points.row(static_cast<Eigen::Index>(i)) = all_points.row(picks[i]);
    out.codes[i] = all_codes[picks[i]];
  }
  return out;
}

int cmd_train_vqvae(RunConfig cfg) {
  cfg.validate();
  data::DatasetPair ds = data::load_dataset_spec(cfg.dataset, cfg.seed);
  const long total_steps = total_train_steps(cfg, ds.train.size());
  cfg.tau_decay = resolve_tau_decay(cfg, total_steps);

  std::filesystem::create_directories(cfg.out_dir);
  std::mt19937_64 rng(cfg.seed);
  models::VQVAEConfig mc = model_config(cfg, &ds.train);
  auto quantizer = quant::make_quantizer(cfg.quantizer, quantizer_options(cfg), rng);
  models::VQVAE model(mc, std::move(quantizer), rng);

  std::ofstream log = open_out(cfg.out_dir + "/train_log.txt");
  diff::AdamState opt(cfg.learning_rate);
  const Eigen::Index n = ds.train.size();
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;

  long step = 0;
  bool done = false;
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index at = 0; at < n && !done; at += cfg.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - at);
      std::vector<Eigen::Index> ids(order.begin() + at, order.begin() + at + count);
      models::StepRecord rec = vqvae_step(model, ds.train.batch(ids), opt, rng);
      ++step;
      if (step % cfg.log_every == 0 || step == total_steps) {
        log << "step=" << step << " loss=" << fmt(rec.loss) << " recon=" << fmt(rec.recon)
            << " aux=" << fmt(rec.aux) << " perplexity=" << fmt(rec.perplexity)
            << " tau=" << fmt(rec.tau) << "\n";
      }
      if (step >= total_steps) done = true;
    }
  }
  log.flush();

  save_model(cfg.out_dir + "/model.ckpt", model, cfg);

  // final summary on the held-out split
  model.set_trainable(false);
  const double test_mse =
      metrics::reconstruction_mse(model, ds.test, cfg.batch_size, cfg.device_threads);
  EmbeddingSample sample = collect_embeddings(model, ds.test, cfg.eval_max_points, cfg.batch_size);
  std::ofstream summary = open_out(cfg.out_dir + "/metrics.txt");
  std::vector<MetricsRow> rows = {
      {"reconstruction_mse", test_mse, "split=test"},
      {"perplexity", metrics::perplexity(sample.usage), "split=test"},
  };
  write_metrics(summary, rows);
  std::cout << "train-vqvae: " << step << " steps, test mse " << fmt(test_mse) << "\n";
  return kExitOk;
}

int cmd_train_classifier(RunConfig cfg, const std::string& checkpoint_path) {
  cfg.validate();
  LoadedModel lm = load_model(checkpoint_path);
  lm.model->set_trainable(false);

  data::DatasetPair ds = data::load_dataset_spec(cfg.dataset, cfg.seed);
  if (!ds.train.labeled()) throw ConfigError("train-classifier: dataset has no labels");
  if (ds.train.channels != lm.model->config().in_channels ||
      ds.train.height != lm.model->config().height ||
      ds.train.width != lm.model->config().width) {
    throw ConfigError("train-classifier: dataset shape does not match checkpoint");
  }

  std::filesystem::create_directories(cfg.out_dir);
  std::mt19937_64 rng(cfg.seed);
  models::ClassifierHead head(lm.model->config().latent_dim, cfg.head_channels, cfg.head_fc,
                              cfg.num_classes, rng);
  diff::AdamState opt(cfg.learning_rate);

  std::ofstream log = open_out(cfg.out_dir + "/classifier_log.txt");
  const Eigen::Index n = ds.train.size();
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.classifier_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, acc_sum = 0.0;
    long batches = 0;
    for (Eigen::Index at = 0; at < n; at += cfg.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - at);
      std::vector<Eigen::Index> ids(order.begin() + at, order.begin() + at + count);
      auto rec = models::classifier_step(*lm.model, head, ds.train.batch(ids),
                                         ds.train.label_batch(ids), opt, rng);
      loss_sum += rec.loss;
      acc_sum += rec.accuracy;
      ++batches;
    }

    // held-out accuracy
    long correct = 0;
    for (Eigen::Index at = 0; at < ds.test.size(); at += cfg.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, ds.test.size() - at);
      diff::Tensor latents = models::quantized_latents(*lm.model, ds.test.batch(at, count), rng);
      diff::Tensor logits = head.forward(latents);
      auto pred = quant::argmax_rows(logits.values(), count, cfg.num_classes);
      auto labels = ds.test.label_batch(at, count);
      for (Eigen::Index i = 0; i < count; ++i) {
        if (pred[i] == labels[i]) ++correct;
      }
    }
    const double test_acc = static_cast<double>(correct) / static_cast<double>(ds.test.size());
    log << "epoch=" << (epoch + 1) << " loss=" << fmt(loss_sum / batches)
        << " train_accuracy=" << fmt(acc_sum / batches) << " test_accuracy=" << fmt(test_acc)
        << "\n";
  }
  log.flush();

  // head checkpoint plus a byte-identical re-save of the frozen backbone
  std::map<std::string, std::string> meta;
  meta["format"] = "classifier-head";
  meta["num_classes"] = std::to_string(cfg.num_classes);
  meta["head_channels"] = std::to_string(cfg.head_channels);
  meta["head_fc"] = std::to_string(cfg.head_fc);
  meta["latent_dim"] = std::to_string(lm.model->config().latent_dim);
  std::vector<io::NamedTensorRef> refs;
  for (auto& nt : head.named_parameters("head")) {
    refs.push_back({nt.name, nt.tensor.shape(), &nt.tensor.values()});
  }
  io::save_checkpoint(cfg.out_dir + "/head.ckpt", refs, meta);
  save_model(cfg.out_dir + "/backbone.ckpt", *lm.model, lm.cfg);
  std::cout << "train-classifier: done\n";
  return kExitOk;
}

int cmd_eval(RunConfig cfg, const std::string& checkpoint_path, bool dump_embeddings) {
  cfg.validate();
  LoadedModel lm = load_model(checkpoint_path);
  lm.model->set_trainable(false);
  data::DatasetPair ds = data::load_dataset_spec(cfg.dataset, cfg.seed);
  std::filesystem::create_directories(cfg.out_dir);

  data::CorruptOps ops;
  ops.rotate = cfg.corrupt_rotate_deg > 0.0;
  ops.max_rotate_deg = cfg.corrupt_rotate_deg;
  ops.flip_prob = cfg.corrupt_flip_prob;
  ops.sigma = cfg.corrupt_sigma;
  std::mt19937_64 corrupt_rng(cfg.seed + 17);
  data::ImageDataset noisy = data::corrupt(ds.test, ops, corrupt_rng);

  std::vector<MetricsRow> rows;
  auto eval_split = [&](const data::ImageDataset& split, const std::string& tag,
                        EmbeddingSample* keep_sample) {
    const double mse =
        metrics::reconstruction_mse(*lm.model, split, cfg.batch_size, cfg.device_threads);
    EmbeddingSample sample =
        collect_embeddings(*lm.model, split, cfg.eval_max_points, cfg.batch_size);
    rows.push_back({"reconstruction_mse", mse, tag});
    rows.push_back({"perplexity", metrics::perplexity(sample.usage), tag});
    std::set<int> distinct(sample.codes.begin(), sample.codes.end());
    if (distinct.size() >= 2) {
      metrics::ClusterAssignment assign{sample.points, sample.codes};
      rows.push_back({"silhouette", metrics::silhouette(assign), tag});
      rows.push_back({"davies_bouldin", metrics::davies_bouldin(assign), tag});
      // exploratory variant: Poincare distances on the projected embeddings
      Eigen::MatrixXd proj(sample.points.rows(), sample.points.cols());
      const geometry::BallConfig ball(lm.cfg.curvature, lm.cfg.boundary_eps);
      for (Eigen::Index i = 0; i < sample.points.rows(); ++i) {
        proj.row(i) = geometry::safe_project(
            geometry::exp_map_origin(sample.points.row(i).transpose(), ball.curvature), ball);
      }
      metrics::ClusterAssignment passign{proj, sample.codes};
      rows.push_back({"silhouette_poincare",
                      metrics::silhouette(passign, metrics::PointMetric::poincare, ball.curvature),
                      tag});
    } else {
      rows.push_back({"silhouette", std::nan(""), tag + " degenerate=1"});
      rows.push_back({"davies_bouldin", std::nan(""), tag + " degenerate=1"});
    }
    if (keep_sample) *keep_sample = std::move(sample);
  };

  EmbeddingSample clean_sample;
  eval_split(ds.test, "split=test condition=clean", &clean_sample);
  eval_split(noisy, "split=test condition=noisy", nullptr);

  std::ofstream report = open_out(cfg.out_dir + "/eval_metrics.txt");
  write_metrics(report, rows);
  write_metrics(std::cout, rows);

  if (dump_embeddings) {
    std::ofstream dump = open_out(cfg.out_dir + "/embeddings.txt");
    for (Eigen::Index i = 0; i < clean_sample.points.rows(); ++i) {
      dump << clean_sample.codes[i];
      for (Eigen::Index c = 0; c < clean_sample.points.cols(); ++c) {
        dump << " " << fmt_full(clean_sample.points(i, c));
      }
      dump << "\n";
    }
  }
  return kExitOk;
}

int cmd_export_codebook(const std::string& checkpoint_path, const std::string& out_path) {
  io::Checkpoint ckpt = io::load_checkpoint(checkpoint_path);
  auto variant_it = ckpt.meta.find("quantizer");
  if (variant_it == ckpt.meta.end()) throw ConfigError("export-codebook: no quantizer meta");
  const std::string variant = variant_it->second;

  using CMapRM =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  Eigen::MatrixXd rows;
  if (variant == "hypervq") {
    if (!ckpt.has("quantizer.normals") || !ckpt.has("quantizer.offsets")) {
      throw ConfigError("export-codebook: missing quantizer tensors");
    }
    const auto& ash = ckpt.shape("quantizer.normals");
    Eigen::MatrixXd a = CMapRM(ckpt.values("quantizer.normals").data(), ash[0], ash[1]);
    Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(
        ckpt.values("quantizer.offsets").data(), ash[0]);
    rows = quant::hypervq_codebook(a, r);
  } else if (variant == "hyperkmeansvq") {
    if (!ckpt.has("quantizer.tangent_codebook")) {
      throw ConfigError("export-codebook: missing quantizer tensors");
    }
    const auto& sh = ckpt.shape("quantizer.tangent_codebook");
    rows = CMapRM(ckpt.values("quantizer.tangent_codebook").data(), sh[0], sh[1]);
  } else if (variant == "kmeansvq" || variant == "gumbelvq" || variant == "hyperembmatvq") {
    if (!ckpt.has("quantizer.codebook")) {
      throw ConfigError("export-codebook: missing quantizer tensors");
    }
    const auto& sh = ckpt.shape("quantizer.codebook");
    rows = CMapRM(ckpt.values("quantizer.codebook").data(), sh[0], sh[1]);
  } else {
    throw ConfigError("export-codebook: quantizer '" + variant + "' has no codebook");
  }

  std::ofstream out = open_out(out_path);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      out << (j ? " " : "") << fmt_full(rows(i, j));
    }
    out << "\n";
  }
  std::cout << "export-codebook: wrote " << rows.rows() << " rows\n";
  return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Vector quantization in hyperbolic space: train, evaluate, export"};
  app.require_subcommand(1);

  std::string config_path, out_dir, quantizer, checkpoint_path, output_path, dataset;
  long seed = -1;
  int device_threads = 0;
  bool dump_embeddings = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file (key = value lines)");
    sub->add_option("--seed", seed, "override random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--quantizer", quantizer, "override quantizer variant");
    sub->add_option("--device-threads", device_threads, "evaluation worker threads");
    sub->add_option("--dataset", dataset, "override dataset spec");
  };

  CLI::App* train = app.add_subcommand("train-vqvae", "train a VQVAE");
  add_common(train);
  CLI::App* train_cls = app.add_subcommand("train-classifier", "train a classifier head on a frozen backbone");
  add_common(train_cls);
  train_cls->add_option("--checkpoint", checkpoint_path, "pretrained VQVAE checkpoint")->required();
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on clean and noisy splits");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "VQVAE checkpoint")->required();
  eval_cmd->add_flag("--dump-embeddings", dump_embeddings, "write sampled embeddings and codes");
  CLI::App* export_cmd = app.add_subcommand("export-codebook", "write the codebook as delimited text");
  export_cmd->add_option("--checkpoint", checkpoint_path, "VQVAE checkpoint")->required();
  export_cmd->add_option("--output", output_path, "output text file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (seed >= 0) cfg.seed = static_cast<unsigned long>(seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!quantizer.empty()) cfg.quantizer = quantizer;
    if (!dataset.empty()) cfg.dataset = dataset;
    if (device_threads > 0) cfg.device_threads = device_threads;

    if (train->parsed()) return cmd_train_vqvae(cfg);
    if (train_cls->parsed()) return cmd_train_classifier(cfg, checkpoint_path);
    if (eval_cmd->parsed()) return cmd_eval(cfg, checkpoint_path, dump_embeddings);
    if (export_cmd->parsed()) return cmd_export_codebook(checkpoint_path, output_path);
    return kExitConfig;
  } catch (const models::NonFiniteLossError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace hypervq::cli
