#include "hypervq/config.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace hypervq::cli {

namespace {

long parse_long(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"quantizer", [](RunConfig& c, const std::string& v) { c.quantizer = v; }},
      {"codebook_size",
       [](RunConfig& c, const std::string& v) { c.codebook_size = static_cast<int>(parse_long("codebook_size", v)); }},
      {"latent_dim",
       [](RunConfig& c, const std::string& v) { c.latent_dim = static_cast<int>(parse_long("latent_dim", v)); }},
      {"curvature", [](RunConfig& c, const std::string& v) { c.curvature = parse_double("curvature", v); }},
      {"boundary_eps",
       [](RunConfig& c, const std::string& v) { c.boundary_eps = parse_double("boundary_eps", v); }},
      {"beta", [](RunConfig& c, const std::string& v) { c.beta = parse_double("beta", v); }},
      {"kmeans_ema", [](RunConfig& c, const std::string& v) { c.kmeans_ema = parse_bool("kmeans_ema", v); }},
      {"ema_decay", [](RunConfig& c, const std::string& v) { c.ema_decay = parse_double("ema_decay", v); }},
      {"tau_max", [](RunConfig& c, const std::string& v) { c.tau_max = parse_double("tau_max", v); }},
      {"tau_min", [](RunConfig& c, const std::string& v) { c.tau_min = parse_double("tau_min", v); }},
      {"tau_decay", [](RunConfig& c, const std::string& v) { c.tau_decay = parse_double("tau_decay", v); }},
      {"learning_rate",
       [](RunConfig& c, const std::string& v) { c.learning_rate = parse_double("learning_rate", v); }},
      {"batch_size",
       [](RunConfig& c, const std::string& v) { c.batch_size = static_cast<int>(parse_long("batch_size", v)); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.epochs = static_cast<int>(parse_long("epochs", v)); }},
      {"steps", [](RunConfig& c, const std::string& v) { c.steps = parse_long("steps", v); }},
      {"seed",
       [](RunConfig& c, const std::string& v) { c.seed = static_cast<unsigned long>(parse_long("seed", v)); }},
      {"dataset", [](RunConfig& c, const std::string& v) { c.dataset = v; }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"hidden_channels",
       [](RunConfig& c, const std::string& v) { c.hidden_channels = static_cast<int>(parse_long("hidden_channels", v)); }},
      {"num_res_blocks",
       [](RunConfig& c, const std::string& v) { c.num_res_blocks = static_cast<int>(parse_long("num_res_blocks", v)); }},
      {"downsample",
       [](RunConfig& c, const std::string& v) { c.downsample = static_cast<int>(parse_long("downsample", v)); }},
      {"device_threads",
       [](RunConfig& c, const std::string& v) { c.device_threads = static_cast<int>(parse_long("device_threads", v)); }},
      {"eval_max_points",
       [](RunConfig& c, const std::string& v) { c.eval_max_points = static_cast<int>(parse_long("eval_max_points", v)); }},
      {"log_every",
       [](RunConfig& c, const std::string& v) { c.log_every = static_cast<int>(parse_long("log_every", v)); }},
      {"classifier_epochs",
       [](RunConfig& c, const std::string& v) { c.classifier_epochs = static_cast<int>(parse_long("classifier_epochs", v)); }},
      {"head_channels",
       [](RunConfig& c, const std::string& v) { c.head_channels = static_cast<int>(parse_long("head_channels", v)); }},
      {"head_fc",
       [](RunConfig& c, const std::string& v) { c.head_fc = static_cast<int>(parse_long("head_fc", v)); }},
      {"num_classes",
       [](RunConfig& c, const std::string& v) { c.num_classes = static_cast<int>(parse_long("num_classes", v)); }},
      {"corrupt_rotate_deg",
       [](RunConfig& c, const std::string& v) { c.corrupt_rotate_deg = parse_double("corrupt_rotate_deg", v); }},
      {"corrupt_flip_prob",
       [](RunConfig& c, const std::string& v) { c.corrupt_flip_prob = parse_double("corrupt_flip_prob", v); }},
      {"corrupt_sigma",
       [](RunConfig& c, const std::string& v) { c.corrupt_sigma = parse_double("corrupt_sigma", v); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second(cfg, value);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
    }
    apply_override(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::validate() const {
  static const char* kVariants[] = {"hypervq",       "kmeansvq",      "gumbelvq",
                                    "hyperkmeansvq", "hyperembmatvq", "identity"};
  bool known = false;
  for (const char* v : kVariants) known = known || quantizer == v;
  if (!known) throw ConfigError("config: unknown quantizer '" + quantizer + "'");
  if (quantizer != "identity" && codebook_size < 2) throw ConfigError("config: codebook_size must be >= 2");
  if (latent_dim < 1) throw ConfigError("config: latent_dim must be >= 1");
  if (!(curvature > 0.0)) throw ConfigError("config: curvature must be > 0");
  if (!(boundary_eps > 0.0 && boundary_eps < 1.0)) throw ConfigError("config: boundary_eps must be in (0,1)");
  if (beta < 0.0) throw ConfigError("config: beta must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("config: ema_decay must be in (0,1)");
  if (!(tau_min > 0.0 && tau_min <= tau_max)) throw ConfigError("config: need 0 < tau_min <= tau_max");
  if (tau_decay != 0.0 && !(tau_decay > 0.0 && tau_decay < 1.0)) {
    throw ConfigError("config: tau_decay must be 0 (auto) or in (0,1)");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (steps < 0) throw ConfigError("config: steps must be >= 0");
  if (hidden_channels < 2) throw ConfigError("config: hidden_channels must be >= 2");
  if (num_res_blocks < 0) throw ConfigError("config: num_res_blocks must be >= 0");
  if (downsample != 2 && downsample != 4) throw ConfigError("config: downsample must be 2 or 4");
  if (device_threads < 1) throw ConfigError("config: device_threads must be >= 1");
  if (eval_max_points < 16) throw ConfigError("config: eval_max_points must be >= 16");
  if (log_every < 1) throw ConfigError("config: log_every must be >= 1");
  if (classifier_epochs < 1) throw ConfigError("config: classifier_epochs must be >= 1");
  if (head_channels < 1 || head_fc < 1) throw ConfigError("config: classifier head widths must be >= 1");
  if (num_classes < 2) throw ConfigError("config: num_classes must be >= 2");
  if (corrupt_rotate_deg < 0.0) throw ConfigError("config: corrupt_rotate_deg must be >= 0");
  if (!(corrupt_flip_prob >= 0.0 && corrupt_flip_prob <= 1.0)) {
    throw ConfigError("config: corrupt_flip_prob must be in [0,1]");
  }
  if (corrupt_sigma < 0.0) throw ConfigError("config: corrupt_sigma must be >= 0");
}

}  // namespace hypervq::cli
