#include "hypervq/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>

namespace hypervq::data {

diff::Tensor ImageDataset::batch(const std::vector<Eigen::Index>& ids) const {
  const Eigen::Index m = image_numel();
  diff::Array v(static_cast<Eigen::Index>(ids.size()) * m);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= size()) throw std::out_of_range("batch: image id out of range");
    std::copy_n(pixels.data() + ids[i] * m, m, v.data() + static_cast<Eigen::Index>(i) * m);
  }
  return diff::Tensor::from_values(
      {static_cast<Eigen::Index>(ids.size()), channels, height, width}, std::move(v));
}

diff::Tensor ImageDataset::batch(Eigen::Index begin, Eigen::Index count) const {
  std::vector<Eigen::Index> ids(count);
  for (Eigen::Index i = 0; i < count; ++i) ids[i] = begin + i;
  return batch(ids);
}

std::vector<int> ImageDataset::label_batch(const std::vector<Eigen::Index>& ids) const {
  if (!labeled()) throw std::logic_error("label_batch: dataset has no labels");
  std::vector<int> out(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) out[i] = labels.at(ids[i]);
  return out;
}

std::vector<int> ImageDataset::label_batch(Eigen::Index begin, Eigen::Index count) const {
  std::vector<Eigen::Index> ids(count);
  for (Eigen::Index i = 0; i < count; ++i) ids[i] = begin + i;
  return label_batch(ids);
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("idx: truncated header in " + path);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  const std::uint32_t magic = read_be32(img, images_path);
  if (magic != kImageMagic) {
    throw std::runtime_error("idx: bad image magic 0x" + std::to_string(magic) + " in " +
                             images_path);
  }
  const std::uint32_t n = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);
  std::vector<std::uint8_t> raw(static_cast<size_t>(n) * rows * cols);
  if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw std::runtime_error("idx: truncated image payload in " + images_path);
  }

  ImageDataset ds;
  ds.channels = 1;
  ds.height = static_cast<int>(rows);
  ds.width = static_cast<int>(cols);
  ds.pixels.resize(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) ds.pixels[i] = raw[i] / 255.0;

  if (!labels_path.empty()) {
    std::ifstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw std::runtime_error("idx: cannot open " + labels_path);
    const std::uint32_t lmagic = read_be32(lbl, labels_path);
    if (lmagic != kLabelMagic) {
      throw std::runtime_error("idx: bad label magic 0x" + std::to_string(lmagic) + " in " +
                               labels_path);
    }
    const std::uint32_t ln = read_be32(lbl, labels_path);
    if (ln != n) {
      throw std::runtime_error("idx: image count " + std::to_string(n) + " != label count " +
                               std::to_string(ln));
    }
    std::vector<std::uint8_t> lraw(ln);
    if (!lbl.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(ln))) {
      throw std::runtime_error("idx: truncated label payload in " + labels_path);
    }
    ds.labels.assign(lraw.begin(), lraw.end());
  }
  return ds;
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      Eigen::Index count, int rows, int cols) {
  if (static_cast<Eigen::Index>(pixels.size()) != count * rows * cols) {
    throw std::invalid_argument("write_idx_images: byte count mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(count));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

std::vector<std::uint8_t> quantize_pixels(const ImageDataset& ds) {
  std::vector<std::uint8_t> out(ds.pixels.size());
  for (size_t i = 0; i < ds.pixels.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(ds.pixels[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

VectorDataset synth_mixture(int k_clusters, int n_per, int dim, double separation,
                            std::mt19937_64& rng) {
  if (k_clusters < 1 || n_per < 1 || dim < 1) throw std::invalid_argument("synth_mixture: bad sizes");
  if (!(separation > 0.0)) throw std::invalid_argument("synth_mixture: separation must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd centers(k_clusters, dim);
  for (int k = 0; k < k_clusters; ++k) {
    for (int attempt = 0; attempt < 256; ++attempt) {
      Eigen::VectorXd u(dim);
      for (int j = 0; j < dim; ++j) u[j] = normal(rng);
      if (u.norm() < 1e-12) continue;
      centers.row(k) = separation * u.normalized();
      bool ok = true;
      for (int prev = 0; prev < k; ++prev) {
        if ((centers.row(k) - centers.row(prev)).norm() < 0.5 * separation) {
          ok = false;
          break;
        }
      }
      if (ok) break;
    }
  }

  VectorDataset ds;
  ds.points.resize(static_cast<Eigen::Index>(k_clusters) * n_per, dim);
  ds.labels.resize(static_cast<size_t>(k_clusters) * n_per);
  Eigen::Index row = 0;
  for (int k = 0; k < k_clusters; ++k) {
    for (int i = 0; i < n_per; ++i, ++row) {
      for (int j = 0; j < dim; ++j) ds.points(row, j) = centers(k, j) + normal(rng);
      ds.labels[row] = k;
    }
  }
  return ds;
}

namespace {

// 5x7 digit glyphs, row-major from the top.
constexpr const char* kGlyphs[10] = {
    "01110"
    "10001"
    "10011"
    "10101"
    "11001"
    "10001"
    "01110",  // 0
    "00100"
    "01100"
    "00100"
    "00100"
    "00100"
    "00100"
    "01110",  // 1
    "01110"
    "10001"
    "00001"
    "00110"
    "01000"
    "10000"
    "11111",  // 2
    "11111"
    "00010"
    "00100"
    "00010"
    "00001"
    "10001"
    "01110",  // 3
    "00010"
    "00110"
    "01010"
    "10010"
    "11111"
    "00010"
    "00010",  // 4
    "11111"
    "10000"
    "11110"
    "00001"
    "00001"
    "10001"
    "01110",  // 5
    "00110"
    "01000"
    "10000"
    "11110"
    "10001"
    "10001"
    "01110",  // 6
    "11111"
    "00001"
    "00010"
    "00100"
    "01000"
    "01000"
    "01000",  // 7
    "01110"
    "10001"
    "10001"
    "01110"
    "10001"
    "10001"
    "01110",  // 8
    "01110"
    "10001"
    "10001"
    "01111"
    "00001"
    "00010"
    "01100",  // 9
};

double glyph_bilinear(int digit, double u, double v) {
  // point samples at integer glyph coords, zero outside [0,5)x[0,7)
  const char* g = kGlyphs[digit];
  auto at = [&](int x, int y) -> double {
    if (x < 0 || x >= 5 || y < 0 || y >= 7) return 0.0;
    return g[y * 5 + x] == '1' ? 1.0 : 0.0;
  };
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const double fx = u - x0, fy = v - y0;
  return at(x0, y0) * (1 - fx) * (1 - fy) + at(x0 + 1, y0) * fx * (1 - fy) +
         at(x0, y0 + 1) * (1 - fx) * fy + at(x0 + 1, y0 + 1) * fx * fy;
}

}  // namespace

ImageDataset synth_digits(Eigen::Index n, std::mt19937_64& rng, const std::string& split) {
  constexpr int kSize = 28;
  constexpr double kScale = 20.0 / 7.0;  // glyph spans ~20px vertically
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  ImageDataset ds;
  ds.channels = 1;
  ds.height = kSize;
  ds.width = kSize;
  ds.split = split;
  ds.pixels.resize(static_cast<size_t>(n) * kSize * kSize);
  ds.labels.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int digit = static_cast<int>(i % 10);
    ds.labels[i] = digit;
    const double jx = (unif(rng) * 2.0 - 1.0) * 2.0;
    const double jy = (unif(rng) * 2.0 - 1.0) * 2.0;
    const double theta = (unif(rng) * 2.0 - 1.0) * 15.0 * std::numbers::pi / 180.0;
    const double intensity = 0.75 + 0.25 * unif(rng);
    const double ct = std::cos(theta), st = std::sin(theta);
    double* img = ds.pixels.data() + i * kSize * kSize;
    for (int y = 0; y < kSize; ++y) {
      for (int x = 0; x < kSize; ++x) {
        const double dx = x - (kSize - 1) / 2.0 - jx;
        const double dy = y - (kSize - 1) / 2.0 - jy;
        const double u = (ct * dx + st * dy) / kScale + 2.0;
        const double v = (-st * dx + ct * dy) / kScale + 3.0;
        double p = intensity * glyph_bilinear(digit, u, v) + 0.02 * normal(rng);
        img[y * kSize + x] = std::clamp(p, 0.0, 1.0);
      }
    }
  }
  return ds;
}

ImageDataset corrupt(const ImageDataset& ds, const CorruptOps& ops, std::mt19937_64& rng) {
  if (!(ops.sigma >= 0.0)) throw std::invalid_argument("corrupt: sigma must be >= 0");
  ImageDataset out = ds;
  out.split = ds.split.empty() ? "corrupt" : ds.split + "+corrupt";
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int H = ds.height, W = ds.width, C = ds.channels;
  const Eigen::Index m = ds.image_numel();
  std::vector<double> tmp(m);

  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    double* img = out.pixels.data() + i * m;
    if (ops.rotate) {
      const double theta = (unif(rng) * 2.0 - 1.0) * ops.max_rotate_deg * std::numbers::pi / 180.0;
      const double ct = std::cos(theta), st = std::sin(theta);
      const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
      for (int c = 0; c < C; ++c) {
        const double* src = img + static_cast<Eigen::Index>(c) * H * W;
        double* dst = tmp.data() + static_cast<Eigen::Index>(c) * H * W;
        for (int y = 0; y < H; ++y) {
          for (int x = 0; x < W; ++x) {
            const double sx = ct * (x - cx) + st * (y - cy) + cx;
            const double sy = -st * (x - cx) + ct * (y - cy) + cy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            auto at = [&](int xx, int yy) -> double {
              if (xx < 0 || xx >= W || yy < 0 || yy >= H) return 0.0;
              return src[yy * W + xx];
            };
            dst[y * W + x] = at(x0, y0) * (1 - fx) * (1 - fy) + at(x0 + 1, y0) * fx * (1 - fy) +
                             at(x0, y0 + 1) * (1 - fx) * fy + at(x0 + 1, y0 + 1) * fx * fy;
          }
        }
      }
      std::copy(tmp.begin(), tmp.end(), img);
    }
    if (ops.flip_prob > 0.0 && unif(rng) < ops.flip_prob) {
      for (int c = 0; c < C; ++c) {
        double* plane = img + static_cast<Eigen::Index>(c) * H * W;
        for (int y = 0; y < H; ++y) {
          std::reverse(plane + y * W, plane + (y + 1) * W);
        }
      }
    }
    if (ops.sigma > 0.0) {
      for (Eigen::Index j = 0; j < m; ++j) {
        img[j] = std::clamp(img[j] + ops.sigma * normal(rng), 0.0, 1.0);
      }
    }
  }
  return out;
}

namespace {

std::map<std::string, std::string> parse_kv(const std::string& body) {
  std::map<std::string, std::string> kv;
  size_t pos = 0;
  while (pos < body.size()) {
    size_t comma = body.find(',', pos);
    if (comma == std::string::npos) comma = body.size();
    const std::string item = body.substr(pos, comma - pos);
    if (!item.empty()) {
      const size_t eq = item.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("dataset spec: expected key=value, got '" + item + "'");
      }
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    pos = comma + 1;
  }
  return kv;
}

Eigen::Index kv_count(const std::map<std::string, std::string>& kv, const std::string& key,
                      Eigen::Index fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const long v = std::stol(it->second);
  if (v < 1) throw std::invalid_argument("dataset spec: " + key + " must be positive");
  return v;
}

ImageDataset take_first(const ImageDataset& ds, Eigen::Index n) {
  if (n >= ds.size()) return ds;
  ImageDataset out;
  out.channels = ds.channels;
  out.height = ds.height;
  out.width = ds.width;
  out.split = ds.split;
  out.pixels.assign(ds.pixels.begin(), ds.pixels.begin() + n * ds.image_numel());
  if (ds.labeled()) out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
  return out;
}

}  // namespace

DatasetPair load_dataset_spec(const std::string& spec, unsigned long seed) {
  const size_t colon = spec.find(':');
  const std::string name = spec.substr(0, colon == std::string::npos ? spec.size() : colon);
  const std::string body = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto kv = parse_kv(body);

  if (name == "digits") {
    const Eigen::Index ntrain = kv_count(kv, "train", 4096);
    const Eigen::Index ntest = kv_count(kv, "test", 1024);
    // distinct streams so the splits never overlap
    std::mt19937_64 rng_train(seed * 2654435761ULL + 1);
    std::mt19937_64 rng_test(seed * 2654435761ULL + 2);
    DatasetPair pair;
    pair.train = synth_digits(ntrain, rng_train, "train");
    pair.test = synth_digits(ntest, rng_test, "test");
    return pair;
  }
  if (name == "mnist") {
    std::string dir = kv.count("dir") ? kv["dir"] : "";
    if (dir.empty()) {
      const char* env = std::getenv("HYPERVQ_DATA_DIR");
      if (env == nullptr || *env == '\0') {
        throw std::invalid_argument("dataset spec: mnist needs dir= or HYPERVQ_DATA_DIR");
      }
      dir = env;
    }
    DatasetPair pair;
    pair.train = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    pair.test = load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    pair.train.split = "train";
    pair.test.split = "test";
    if (kv.count("train")) pair.train = take_first(pair.train, kv_count(kv, "train", 0));
    if (kv.count("test")) pair.test = take_first(pair.test, kv_count(kv, "test", 0));
    return pair;
  }
  if (name == "idx") {
    if (!kv.count("images") || !kv.count("labels")) {
      throw std::invalid_argument("dataset spec: idx needs images= and labels=");
    }
    DatasetPair pair;
    pair.train = load_idx(kv["images"], kv["labels"]);
    pair.train.split = "train";
    if (kv.count("test_images")) {
      pair.test = load_idx(kv["test_images"], kv.count("test_labels") ? kv["test_labels"] : "");
    } else {
      pair.test = pair.train;
    }
    pair.test.split = "test";
    return pair;
  }
  throw std::invalid_argument("dataset spec: unknown kind '" + name + "'");
}

}  // namespace hypervq::data
