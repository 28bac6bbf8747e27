#pragma once

#include <functional>
#include <random>
#include <vector>

#include "hypervq/diff/ops.hpp"

namespace hvqtest {

using hypervq::diff::Array;
using hypervq::diff::Shape;
using hypervq::diff::Tensor;

// Rebuilds tensors from raw buffers on every call so each evaluation gets a
// fresh graph.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

inline Array random_array(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Array a(n);
  for (Eigen::Index i = 0; i < n; ++i) a[i] = unif(rng);
  return a;
}

// Max relative error of analytic gradients against central finite
// differences over all input coordinates.
inline double grad_check(const ScalarFn& fn, const std::vector<Shape>& shapes,
                         std::vector<Array> values, double step = 1e-6) {
  auto eval = [&](const std::vector<Array>& vals, bool with_grad) {
    std::vector<Tensor> inputs;
    for (size_t i = 0; i < shapes.size(); ++i) {
      inputs.push_back(Tensor::from_values(shapes[i], vals[i], with_grad));
    }
    Tensor loss = fn(inputs);
    return std::pair{loss, inputs};
  };

  auto [loss, inputs] = eval(values, true);
  hypervq::diff::backward(loss);
  std::vector<Array> analytic;
  for (auto& t : inputs) {
    analytic.push_back(t.has_grad() ? t.grad() : Array(Array::Zero(t.size())));
  }

  double max_rel = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    for (Eigen::Index j = 0; j < values[i].size(); ++j) {
      std::vector<Array> plus = values, minus = values;
      plus[i][j] += step;
      minus[i][j] -= step;
      const double fplus = eval(plus, false).first.item();
      const double fminus = eval(minus, false).first.item();
      const double fd = (fplus - fminus) / (2.0 * step);
      const double a = analytic[i][j];
      const double rel = std::abs(a - fd) / std::max({1e-4, std::abs(a), std::abs(fd)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// Random cotangent wrapper: sum(w * op(inputs)) exercises the full Jacobian.
inline ScalarFn weighted(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                         const Array& weights, const Shape& out_shape) {
  Tensor w = Tensor::from_values(out_shape, weights);
  return [op, w](const std::vector<Tensor>& inputs) { return hypervq::diff::sum(op(inputs) * w); };
}

}  // namespace hvqtest
