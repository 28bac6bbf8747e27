#include "hypervq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hypervq::io {

namespace {

constexpr const char* kHeader = "HVQCKPT v1";

void put_le64(std::string& buf, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

void check_token(std::istringstream& line, const std::string& expected, const std::string& ctx) {
  std::string tok;
  line >> tok;
  if (tok != expected) {
    throw std::runtime_error("checkpoint: expected '" + expected + "' in " + ctx + ", got '" +
                             tok + "'");
  }
}

}  // namespace

const diff::Array& Checkpoint::values(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
  return it->second.second;
}

const diff::Shape& Checkpoint::shape(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
  return it->second.first;
}

void save_checkpoint(const std::string& path, const std::vector<NamedTensorRef>& tensors,
                     const std::map<std::string, std::string>& meta) {
  std::ostringstream manifest;
  manifest << kHeader << "\n";
  for (const auto& [key, value] : meta) {
    if (key.find_first_of(" \n") != std::string::npos ||
        value.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint: meta keys/values must be single-line, key no spaces");
    }
    manifest << "meta " << key << " " << value << "\n";
  }
  std::string payload;
  for (const auto& t : tensors) {
    if (t.name.find_first_of(" \n") != std::string::npos) {
      throw std::invalid_argument("checkpoint: tensor name contains whitespace: " + t.name);
    }
    if (t.values->size() != diff::numel(t.shape)) {
      throw std::invalid_argument("checkpoint: shape/value mismatch for " + t.name);
    }
    manifest << "tensor " << t.name << " dims " << t.shape.size();
    for (Eigen::Index d : t.shape) manifest << " " << d;
    manifest << " offset " << payload.size() << " bytes " << t.values->size() * 8 << "\n";
    for (Eigen::Index i = 0; i < t.values->size(); ++i) put_le64(payload, (*t.values)[i]);
  }
  manifest << "payload " << payload.size() << "\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  const std::string header = manifest.str();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error("checkpoint: bad header in " + path);
  }

  Checkpoint ckpt;
  struct Entry {
    std::string name;
    diff::Shape shape;
    std::size_t offset, bytes;
  };
  std::vector<Entry> entries;
  std::size_t payload_bytes = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      Entry e;
      ls >> e.name;
      check_token(ls, "dims", e.name);
      std::size_t nd = 0;
      ls >> nd;
      e.shape.resize(nd);
      for (std::size_t i = 0; i < nd; ++i) ls >> e.shape[i];
      check_token(ls, "offset", e.name);
      ls >> e.offset;
      check_token(ls, "bytes", e.name);
      ls >> e.bytes;
      if (!ls) throw std::runtime_error("checkpoint: malformed tensor line for " + e.name);
      entries.push_back(std::move(e));
    } else if (kind == "payload") {
      ls >> payload_bytes;
      break;
    } else {
      throw std::runtime_error("checkpoint: unknown manifest line '" + line + "'");
    }
  }

  std::string payload(payload_bytes, '\0');
  if (!in.read(payload.data(), static_cast<std::streamsize>(payload_bytes))) {
    throw std::runtime_error("checkpoint: truncated payload in " + path);
  }
  for (const auto& e : entries) {
    if (e.offset + e.bytes > payload_bytes || e.bytes != diff::numel(e.shape) * 8u) {
      throw std::runtime_error("checkpoint: bad payload range for " + e.name);
    }
    diff::Array values(static_cast<Eigen::Index>(e.bytes / 8));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      values[i] = get_le64(payload.data() + e.offset + static_cast<std::size_t>(i) * 8);
    }
    ckpt.order.push_back(e.name);
    ckpt.tensors[e.name] = {e.shape, std::move(values)};
  }
  return ckpt;
}

}  // namespace hypervq::io
