#include "hypervq/diff/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace hypervq::diff {

Eigen::Index numel(const Shape& shape) {
  Eigen::Index n = 1;
  for (Eigen::Index d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

void Node::accumulate(const Array& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Tensor::from_values(Shape shape, Array values, bool requires_grad) {
  for (Eigen::Index d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: dimensions must be positive, got " + shape_str(shape));
  }
  if (values.size() != numel(shape)) {
    throw std::invalid_argument("tensor: value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, const std::vector<double>& values, bool requires_grad) {
  Array a = Eigen::Map<const Array>(values.data(), static_cast<Eigen::Index>(values.size()));
  return from_values(std::move(shape), std::move(a), requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Array a = Array::Zero(numel(shape));
  return from_values(std::move(shape), std::move(a), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  Array a = Array::Constant(numel(shape), value);
  return from_values(std::move(shape), std::move(a));
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor has " + std::to_string(size()) + " elements");
  return node_->value[0];
}

void Tensor::set_requires_grad(bool flag) {
  if (node_->backprop) throw std::logic_error("set_requires_grad: only leaf tensors can be toggled");
  node_->requires_grad = flag;
}

const Array& Tensor::grad() const {
  if (node_->grad.size() == 0) throw std::runtime_error("grad: no gradient accumulated on this tensor");
  return node_->grad;
}

Tensor Tensor::detach() const {
  return from_values(node_->shape, Array(node_->value), /*requires_grad=*/false);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  Node* root = loss.node().get();
  if (root->value.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, has shape " + shape_str(root->shape));
  }
  if (root->swept) {
    throw std::logic_error("backward: graph already swept; rerun the forward pass first");
  }
  if (!root->requires_grad) return;  // nothing reachable needs gradients

  // Iterative post-order DFS over requires_grad parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root->grad = Array::Ones(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && node->grad.size() > 0) node->backprop(*node);
    node->swept = true;
  }
}

}  // namespace hypervq::diff
