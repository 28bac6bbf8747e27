#include "hypervq/geometry.hpp"

namespace hypervq::geometry {

double artanh_guarded(double x) {
  if (std::abs(x) < 1.0) return std::atanh(x);
  if (std::abs(x) > 1.0 + 1e-7) {
    throw std::domain_error("artanh argument " + std::to_string(x) +
                            " out of domain by more than 1e-7");
  }
  return std::atanh(std::copysign(std::nextafter(1.0, 0.0), x));
}

double tanhc(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0;
  }
  return std::tanh(x) / x;
}

double atanhc(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return 1.0 + x2 / 3.0 + x2 * x2 / 5.0;
  }
  if (std::abs(x) >= 1.0) {
    return artanh_guarded(x) / x;
  }
  return std::atanh(x) / x;
}

double conformal_factor(const Eigen::Ref<const Eigen::VectorXd>& x, double c) {
  return 2.0 / (1.0 - c * x.squaredNorm());
}

Eigen::VectorXd mobius_add(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y, double c) {
  const double xy = x.dot(y);
  const double xx = x.squaredNorm();
  const double yy = y.squaredNorm();
  const double den = 1.0 + 2.0 * c * xy + c * c * xx * yy;
  return ((1.0 + 2.0 * c * xy + c * yy) * x + (1.0 - c * xx) * y) / den;
}

Eigen::VectorXd exp_map(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& v, double c) {
  const double sc = std::sqrt(c);
  const double lam = conformal_factor(x, c);
  const double arg = sc * lam * v.norm() / 2.0;
  // tanh(arg) v / (sc*||v||) = v * (lam/2) * tanhc(arg)
  Eigen::VectorXd step = v * (lam / 2.0) * tanhc(arg);
  return mobius_add(x, step, c);
}

Eigen::VectorXd exp_map_origin(const Eigen::Ref<const Eigen::VectorXd>& v, double c) {
  const double sc = std::sqrt(c);
  return v * tanhc(sc * v.norm());
}

Eigen::VectorXd log_map(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y, double c) {
  if (x == y) return Eigen::VectorXd::Zero(x.size());  // exact, no cancellation residue
  const double sc = std::sqrt(c);
  const double lam = conformal_factor(x, c);
  Eigen::VectorXd d = mobius_add(-x, y, c);
  return d * (2.0 / lam) * atanhc(sc * d.norm());
}

Eigen::VectorXd log_map_origin(const Eigen::Ref<const Eigen::VectorXd>& y, double c) {
  const double sc = std::sqrt(c);
  return y * atanhc(sc * y.norm());
}

double distance(const Eigen::Ref<const Eigen::VectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& y, double c) {
  if (x == y) return 0.0;  // exact, no cancellation residue
  const double sc = std::sqrt(c);
  const double n = mobius_add(-x, y, c).norm();
  return 2.0 / sc * artanh_guarded(sc * n);
}

Eigen::VectorXd safe_project(const Eigen::Ref<const Eigen::VectorXd>& p, const BallConfig& cfg) {
  if (!p.allFinite()) throw std::invalid_argument("safe_project: non-finite input");
  const double shell = cfg.shell_radius();
  const double n = p.norm();
  if (n <= shell) return p;
  return p * (shell / n);
}

double hyperplane_signed_score(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const Eigen::Ref<const Eigen::VectorXd>& a, double r, double c) {
  const double an = a.norm();
  if (!(an > 0.0)) throw std::invalid_argument("hyperplane_signed_score: zero normal");
  const double sc = std::sqrt(c);
  const Eigen::VectorXd q = exp_map_origin((r / an) * a, c);
  const Eigen::VectorXd d = mobius_add(-q, x, c);
  const double arg = 2.0 * sc * d.dot(a) / ((1.0 - c * d.squaredNorm()) * an);
  return an / sc * std::asinh(arg);
}

BallPoint::BallPoint(Eigen::VectorXd coords_, BallConfig cfg)
    : coords(std::move(coords_)), config(cfg) {
  if (!coords.allFinite()) throw std::invalid_argument("BallPoint: non-finite coordinates");
  if (!(config.curvature * coords.squaredNorm() < 1.0)) {
    throw std::invalid_argument("BallPoint: point not strictly inside the ball");
  }
}

TangentVector::TangentVector(Eigen::VectorXd coords_) : coords(std::move(coords_)) {
  if (!coords.allFinite()) throw std::invalid_argument("TangentVector: non-finite coordinates");
}

namespace {

void check_pair(const BallPoint& x, const BallPoint& y) {
  if (x.coords.size() != y.coords.size()) {
    throw std::invalid_argument("geometry: dimension mismatch");
  }
  if (!(x.config == y.config)) throw std::invalid_argument("geometry: mismatched ball configs");
}

// Points can land numerically on the boundary after Mobius addition; pull
// them back into the shell before constructing the result.
BallPoint into_ball(Eigen::VectorXd v, const BallConfig& cfg) {
  if (cfg.curvature * v.squaredNorm() >= 1.0) {
    v = safe_project(v, cfg);
  }
  return BallPoint(std::move(v), cfg);
}

}  // namespace

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  check_pair(x, y);
  return into_ball(mobius_add(x.coords, y.coords, x.config.curvature), x.config);
}

double conformal_factor(const BallPoint& x) {
  return conformal_factor(x.coords, x.config.curvature);
}

BallPoint exp_map(const BallPoint& x, const TangentVector& v) {
  if (x.coords.size() != v.coords.size()) {
    throw std::invalid_argument("exp_map: dimension mismatch");
  }
  if (v.coords.isZero(0.0)) return x;  // exact, no norm division
  return into_ball(exp_map(x.coords, v.coords, x.config.curvature), x.config);
}

BallPoint exp_map_origin(const TangentVector& v, const BallConfig& cfg) {
  return into_ball(exp_map_origin(v.coords, cfg.curvature), cfg);
}

TangentVector log_map(const BallPoint& x, const BallPoint& y) {
  check_pair(x, y);
  return TangentVector(log_map(x.coords, y.coords, x.config.curvature));
}

TangentVector log_map_origin(const BallPoint& y) {
  return TangentVector(log_map_origin(y.coords, y.config.curvature));
}

double distance(const BallPoint& x, const BallPoint& y) {
  check_pair(x, y);
  return distance(x.coords, y.coords, x.config.curvature);
}

BallPoint safe_project_point(const Eigen::Ref<const Eigen::VectorXd>& p, const BallConfig& cfg) {
  return BallPoint(safe_project(p, cfg), cfg);
}

double hyperplane_signed_score(const BallPoint& x, const TangentVector& a, double r) {
  if (x.coords.size() != a.coords.size()) {
    throw std::invalid_argument("hyperplane_signed_score: dimension mismatch");
  }
  return hyperplane_signed_score(x.coords, a.coords, r, x.config.curvature);
}

}  // namespace hypervq::geometry
