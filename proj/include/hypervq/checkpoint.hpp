#pragma once

#include <map>
#include <string>
#include <vector>

#include "hypervq/diff/tensor.hpp"

namespace hypervq::io {

// Single-file checkpoint: a text manifest (meta key/values plus per-tensor
// name, shape, payload byte offset) followed by one raw block of row-major
// little-endian float64 payloads. Round-trips bit-exact.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::string> order;  // tensor names, manifest order
  std::map<std::string, std::pair<diff::Shape, diff::Array>> tensors;

  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  const diff::Array& values(const std::string& name) const;
  const diff::Shape& shape(const std::string& name) const;
};

struct NamedTensorRef {
  std::string name;
  diff::Shape shape;
  const diff::Array* values;
};

void save_checkpoint(const std::string& path, const std::vector<NamedTensorRef>& tensors,
                     const std::map<std::string, std::string>& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hypervq::io
