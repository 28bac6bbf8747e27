#pragma once

#include "hypervq/diff/tensor.hpp"

namespace hypervq::diff::detail {

// Node factory: requires_grad is inherited from parents; graphs that need no
// gradient drop their parents and backprop rule entirely.
Tensor make_node(Shape shape, Array value, std::vector<NodePtr> parents,
                 const std::function<std::function<void(Node&)>()>& make_backprop);

int normalize_axis(int axis, int ndim);
Shape align_shape(const Shape& s, size_t ndim);
Shape broadcast_shapes(const Shape& a, const Shape& b);
// Expand values of shape `from` to shape `to` (numpy trailing-dim rules).
Array broadcast_array(const Array& v, const Shape& from, const Shape& to);
// Adjoint of broadcast_array: sum g (shape `from`) down to shape `to`.
Array reduce_to(const Array& g, const Shape& from, const Shape& to);

}  // namespace hypervq::diff::detail
