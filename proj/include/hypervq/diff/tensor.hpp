#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hypervq::diff {

using Array = Eigen::ArrayXd;
using Shape = std::vector<Eigen::Index>;

Eigen::Index numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// One recorded operation result. Parents + backprop form the dynamic graph
// for the current forward pass; leaves (parameters, constants) have no
// backprop rule.
struct Node {
  Shape shape;
  Array value;
  Array grad;  // empty until backward touches this node
  bool requires_grad = false;
  bool swept = false;  // backward already consumed this graph
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void accumulate(const Array& g);
};

using NodePtr = std::shared_ptr<Node>;

// Shape-carrying dense double array, handle to a graph node. Copies are
// shallow (share the node); parameters are leaves with requires_grad set.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor from_values(Shape shape, Array values, bool requires_grad = false);
  static Tensor from_values(Shape shape, const std::vector<double>& values,
                            bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Eigen::Index size() const { return node_->value.size(); }
  int ndim() const { return static_cast<int>(node_->shape.size()); }

  const Array& values() const { return node_->value; }
  Array& values() { return node_->value; }  // parameter updates only
  double item() const;                      // requires size() == 1

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);  // leaves only
  bool has_grad() const { return node_->grad.size() > 0; }
  const Array& grad() const;  // throws if no gradient accumulated
  void clear_grad() { node_->grad.resize(0); }

  // Stop-gradient: a fresh constant leaf holding a copy of the values.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Reverse sweep from a scalar loss: populates grad on every reachable
// requires_grad tensor. A graph may be swept once; rebuilding the forward
// pass creates a fresh graph.
void backward(const Tensor& loss);

}  // namespace hypervq::diff
