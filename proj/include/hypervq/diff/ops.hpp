#pragma once

#include "hypervq/diff/tensor.hpp"

namespace hypervq::diff {

// Elementwise binary ops broadcast trailing dimensions numpy-style
// (dims equal or 1); gradients are sum-reduced back over broadcast axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
inline Tensor operator+(double s, const Tensor& a) { return add(Tensor::scalar(s), a); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, Tensor::scalar(s)); }
inline Tensor operator-(double s, const Tensor& a) { return sub(Tensor::scalar(s), a); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator*(double s, const Tensor& a) { return mul(Tensor::scalar(s), a); }
inline Tensor operator/(const Tensor& a, double s) { return div(a, Tensor::scalar(s)); }
inline Tensor operator/(double s, const Tensor& a) { return div(Tensor::scalar(s), a); }

// Elementwise unary.
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor artanh(const Tensor& a);  // |x| < 1; nextafter nudge within 1e-7, bug beyond
Tensor asinh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor pow(const Tensor& a, double p);
// tanh(x)/x and artanh(x)/x, both 1 at x = 0; smooth at the origin so the
// exp/log maps compose without dividing by a vanishing norm.
Tensor tanhc(const Tensor& a);
Tensor atanhc(const Tensor& a);

// Shape ops.
Tensor reshape(const Tensor& a, Shape shape);
Tensor broadcast_to(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<int>& axes);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// Reductions. Negative axes count from the back.
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int axis, bool keepdim);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis, bool keepdim);
Tensor dot(const Tensor& a, const Tensor& b);  // flat inner product, scalar
Tensor l2_norm(const Tensor& a, int axis, bool keepdim);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Neural-net ops.
Tensor softmax(const Tensor& a, int axis);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);  // [N,K], mean NLL
Tensor mse(const Tensor& pred, const Tensor& target);
// x [N,C,H,W], w [OC,C,kh,kw] -> [N,OC,H',W']
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding);
// x [N,IC,H,W], w [IC,OC,kh,kw] -> [N,OC,(H-1)*stride-2*padding+kh, ...]
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int stride, int padding);
// Forward takes hard's values; backward routes everything to soft.
Tensor straight_through(const Tensor& hard, const Tensor& soft);

}  // namespace hypervq::diff
