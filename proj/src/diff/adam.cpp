#include "hypervq/diff/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace hypervq::diff {

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i] = Array::Zero(params[i].size());
      state.v[i] = Array::Zero(params[i].size());
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter list changed size");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::runtime_error("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    const Array& g = params[i].grad();
    Array& m = state.m[i];
    Array& v = state.v[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    params[i].values() -= state.learning_rate * (m / bc1) / ((v / bc2).sqrt() + state.eps);
  }
}

void clear_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.clear_grad();
}

}  // namespace hypervq::diff
