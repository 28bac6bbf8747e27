#pragma once

#include "hypervq/diff/ops.hpp"
#include "hypervq/geometry.hpp"

namespace hypervq::geometry {

// Differentiable Poincare-ball ops over batches of row vectors; the last
// axis is the point dimension, leading axes broadcast. Built entirely from
// diff primitives so the whole chain backpropagates.

diff::Tensor squared_norm(const diff::Tensor& x);  // last axis, kept
diff::Tensor mobius_add(const diff::Tensor& x, const diff::Tensor& y, double c);
diff::Tensor exp_map_origin(const diff::Tensor& v, double c);
diff::Tensor log_map_origin(const diff::Tensor& y, double c);
diff::Tensor distance(const diff::Tensor& x, const diff::Tensor& y, double c);
diff::Tensor safe_project(const diff::Tensor& p, const BallConfig& cfg);
// a: [K,d] normals, r: [K,1] offsets, x: [N,d] ball points -> [N,K] scores
diff::Tensor hyperplane_signed_score(const diff::Tensor& x, const diff::Tensor& a,
                                     const diff::Tensor& r, double c);

}  // namespace hypervq::geometry
