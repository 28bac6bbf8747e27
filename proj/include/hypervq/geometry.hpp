#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace hypervq::geometry {

// Curvature parameter c > 0 (ball radius 1/sqrt(c)) plus the boundary shell
// width used by safe projection.
struct BallConfig {
  double curvature = 1.0;
  double boundary_eps = 1e-5;

  BallConfig() = default;
  BallConfig(double c, double eps) : curvature(c), boundary_eps(eps) {
    if (!(c > 0.0)) throw std::invalid_argument("BallConfig: curvature must be positive");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("BallConfig: eps must be in (0,1)");
  }
  double shell_radius() const { return (1.0 - boundary_eps) / std::sqrt(curvature); }
};

inline bool operator==(const BallConfig& a, const BallConfig& b) {
  return a.curvature == b.curvature && a.boundary_eps == b.boundary_eps;
}

// artanh with its argument nudged into (-1, 1); out of domain by more than
// 1e-7 is a caller bug.
double artanh_guarded(double x);
// tanh(x)/x and artanh(x)/x with exact limits at 0.
double tanhc(double x);
double atanhc(double x);

// ---- Expression-friendly raw layer (no validation, caller owns configs) ----

double conformal_factor(const Eigen::Ref<const Eigen::VectorXd>& x, double c);
Eigen::VectorXd mobius_add(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y, double c);
Eigen::VectorXd exp_map(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& v, double c);
Eigen::VectorXd exp_map_origin(const Eigen::Ref<const Eigen::VectorXd>& v, double c);
Eigen::VectorXd log_map(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y, double c);
Eigen::VectorXd log_map_origin(const Eigen::Ref<const Eigen::VectorXd>& y, double c);
double distance(const Eigen::Ref<const Eigen::VectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& y, double c);
Eigen::VectorXd safe_project(const Eigen::Ref<const Eigen::VectorXd>& p, const BallConfig& cfg);
double hyperplane_signed_score(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const Eigen::Ref<const Eigen::VectorXd>& a, double r, double c);

// ---- Checked domain types ----

struct BallPoint {
  Eigen::VectorXd coords;
  BallConfig config;

  BallPoint(Eigen::VectorXd coords_, BallConfig cfg);
};

struct TangentVector {
  Eigen::VectorXd coords;

  explicit TangentVector(Eigen::VectorXd coords_);
};

BallPoint mobius_add(const BallPoint& x, const BallPoint& y);
double conformal_factor(const BallPoint& x);
BallPoint exp_map(const BallPoint& x, const TangentVector& v);
BallPoint exp_map_origin(const TangentVector& v, const BallConfig& cfg);
TangentVector log_map(const BallPoint& x, const BallPoint& y);
TangentVector log_map_origin(const BallPoint& y);
double distance(const BallPoint& x, const BallPoint& y);
BallPoint safe_project_point(const Eigen::Ref<const Eigen::VectorXd>& p, const BallConfig& cfg);
double hyperplane_signed_score(const BallPoint& x, const TangentVector& a, double r);

}  // namespace hypervq::geometry
