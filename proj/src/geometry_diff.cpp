#include "hypervq/geometry_diff.hpp"

namespace hypervq::geometry {

using diff::Tensor;

Tensor squared_norm(const Tensor& x) { return diff::sum(diff::square(x), -1, true); }

Tensor mobius_add(const Tensor& x, const Tensor& y, double c) {
  Tensor xy = diff::sum(x * y, -1, true);
  Tensor xx = squared_norm(x);
  Tensor yy = squared_norm(y);
  Tensor num = (1.0 + 2.0 * c * xy + c * yy) * x + (1.0 - c * xx) * y;
  Tensor den = 1.0 + 2.0 * c * xy + (c * c) * xx * yy;
  return num / den;
}

Tensor exp_map_origin(const Tensor& v, double c) {
  Tensor n = diff::l2_norm(v, -1, true);
  return v * diff::tanhc(std::sqrt(c) * n);
}

Tensor log_map_origin(const Tensor& y, double c) {
  Tensor n = diff::l2_norm(y, -1, true);
  return y * diff::atanhc(std::sqrt(c) * n);
}

Tensor distance(const Tensor& x, const Tensor& y, double c) {
  const double sc = std::sqrt(c);
  Tensor n = diff::l2_norm(mobius_add(diff::neg(x), y, c), -1, true);
  return (2.0 / sc) * diff::artanh(sc * n);
}

Tensor safe_project(const Tensor& p, const BallConfig& cfg) {
  const double shell = cfg.shell_radius();
  Tensor n = diff::l2_norm(p, -1, true);
  // 0/1 mask of rows beyond the shell, fixed at forward time
  diff::Array mask_v = (n.values() > shell).cast<double>();
  Tensor mask = Tensor::from_values(n.shape(), std::move(mask_v));
  // keep the denominator >= 1 on rows where the branch is masked out,
  // so zero rows never divide by zero
  Tensor n_safe = n * mask + (1.0 - mask);
  return p * (1.0 - mask) + (p / n_safe) * (shell * mask);
}

Tensor hyperplane_signed_score(const Tensor& x, const Tensor& a, const Tensor& r, double c) {
  if (x.ndim() != 2 || a.ndim() != 2 || x.shape()[1] != a.shape()[1]) {
    throw std::invalid_argument("hyperplane_signed_score: expects x [N,d], a [K,d]");
  }
  const Eigen::Index N = x.shape()[0], K = a.shape()[0], d = a.shape()[1];
  if (r.size() != K) throw std::invalid_argument("hyperplane_signed_score: r must have K entries");
  if ((diff::l2_norm(a, -1, true).values() <= 0.0).any()) {
    throw std::invalid_argument("hyperplane_signed_score: degenerate zero normal");
  }
  const double sc = std::sqrt(c);

  Tensor an = diff::l2_norm(a, -1, true);                          // [K,1]
  Tensor ahat = a / an;                                            // [K,d]
  Tensor q = exp_map_origin(diff::reshape(r, {K, 1}) * ahat, c);   // [K,d]
  Tensor dv = mobius_add(diff::reshape(diff::neg(q), {1, K, d}),
                         diff::reshape(x, {N, 1, d}), c);          // [N,K,d]
  Tensor ip = diff::sum(dv * diff::reshape(a, {1, K, d}), -1, true);  // [N,K,1]
  Tensor den = (1.0 - c * squared_norm(dv)) * diff::reshape(an, {1, K, 1});
  Tensor score = diff::reshape(an, {1, K, 1}) * (1.0 / sc) * diff::asinh(2.0 * sc * ip / den);
  return diff::reshape(score, {N, K});
}

}  // namespace hypervq::geometry
