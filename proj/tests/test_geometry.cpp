#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hypervq/geometry.hpp"

using namespace hypervq::geometry;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

VectorXd random_in_ball(int dim, double c, std::mt19937_64& rng, double max_frac = 0.85) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = unif(rng);
  const double radius = max_frac / std::sqrt(c);
  std::uniform_real_distribution<double> ru(0.0, radius);
  const double n = v.norm();
  if (n < 1e-12) return VectorXd::Zero(dim);
  return v * (ru(rng) / n);
}

}  // namespace

TEST_CASE("mobius addition identities and frozen value") {
  std::mt19937_64 rng(7);
  const BallConfig cfg(1.0, 1e-5);

  SUBCASE("left identity is bitwise") {
    for (int i = 0; i < 200; ++i) {
      VectorXd y = random_in_ball(3, 1.0, rng);
      VectorXd out = mobius_add(VectorXd::Zero(3), y, 1.0);
      for (int j = 0; j < 3; ++j) CHECK(out[j] == y[j]);
    }
  }
  SUBCASE("cancellation to rounding") {
    for (int i = 0; i < 200; ++i) {
      VectorXd x = random_in_ball(3, 1.0, rng);
      VectorXd out = mobius_add(x, VectorXd(-x), 1.0);
      CHECK(out.norm() <= 1e-15 * (1.0 + x.norm()));
    }
  }
  SUBCASE("collinear closed form") {
    VectorXd out = mobius_add(vec2(0.3, 0.0), vec2(0.4, 0.0), 1.0);
    CHECK(out[0] == doctest::Approx(0.625).epsilon(1e-14));
    CHECK(out[1] == 0.0);
  }
  SUBCASE("typed wrapper validates") {
    BallPoint x(vec2(0.1, 0.2), cfg);
    BallPoint y(vec2(0.3, 0.0), BallConfig(4.0, 1e-5));
    CHECK_THROWS_AS(mobius_add(x, y), std::invalid_argument);
    BallPoint z(VectorXd::Zero(3), cfg);
    CHECK_THROWS_AS(mobius_add(x, z), std::invalid_argument);
  }
}

TEST_CASE("conformal factor") {
  CHECK(conformal_factor(VectorXd::Zero(2), 1.0) == 2.0);
  CHECK(conformal_factor(vec2(0.5, 0.0), 1.0) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
  CHECK(conformal_factor(vec2(1.0, 0.0), 0.25) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
  CHECK(conformal_factor(VectorXd::Zero(5), 2.5) == 2.0);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    VectorXd x = random_in_ball(4, 1.0, rng);
    CHECK(conformal_factor(x, 1.0) >= 2.0);
  }
}

TEST_CASE("exp map") {
  const BallConfig cfg(1.0, 1e-5);
  SUBCASE("zero tangent returns the base point exactly") {
    BallPoint x(vec2(0.3, -0.2), cfg);
    BallPoint out = exp_map(x, TangentVector(VectorXd::Zero(2)));
    CHECK(out.coords[0] == x.coords[0]);
    CHECK(out.coords[1] == x.coords[1]);
  }
  SUBCASE("origin frozen value") {
    // oracle: tanh(0.5) at 40-digit precision
    VectorXd out = exp_map_origin(vec2(0.5, 0.0), 1.0);
    CHECK(out[0] == doctest::Approx(0.4621171572600098).epsilon(1e-14));
    CHECK(out[1] == 0.0);
  }
  SUBCASE("tanh saturation keeps large tangents inside the shell") {
    // tanh(20) rounds to 1.0 in double; the checked op pulls the point back
    // inside through the shell
    BallPoint out = exp_map_origin(TangentVector(vec2(20.0, 0.0)), BallConfig(1.0, 1e-7));
    CHECK(out.coords.norm() < 1.0);
    CHECK(out.coords.norm() > 1.0 - 1e-6);
  }
  SUBCASE("origin specialization is bitwise consistent") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
      VectorXd v(3);
      for (int j = 0; j < 3; ++j) v[j] = std::uniform_real_distribution<double>(-2, 2)(rng);
      VectorXd a = exp_map_origin(v, 1.0);
      VectorXd b = exp_map(VectorXd::Zero(3), v, 1.0);
      for (int j = 0; j < 3; ++j) CHECK(a[j] == b[j]);
    }
  }
}

TEST_CASE("log map inverts exp map") {
  SUBCASE("log of the base point is zero") {
    VectorXd out = log_map(vec2(0.2, 0.1), vec2(0.2, 0.1), 1.0);
    CHECK(out.norm() == 0.0);
  }
  SUBCASE("frozen inverse of the exp example") {
    VectorXd out = log_map_origin(vec2(0.4621171572600098, 0.0), 1.0);
    CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-13));
  }
  SUBCASE("roundtrip at several curvatures") {
    std::mt19937_64 rng(23);
    for (double c : {0.25, 1.0, 4.0}) {
      for (int i = 0; i < 1000; ++i) {
        VectorXd v(3);
        for (int j = 0; j < 3; ++j) v[j] = std::uniform_real_distribution<double>(-1, 1)(rng);
        v *= 3.0 / std::max(1.0, v.norm());
        VectorXd back = log_map_origin(exp_map_origin(v, c), c);
        CHECK((back - v).norm() < 1e-6 * (1.0 + v.norm()));

        VectorXd x = random_in_ball(3, c, rng, 0.6);
        VectorXd y = random_in_ball(3, c, rng, 0.6);
        VectorXd w = log_map(x, y, c);
        VectorXd y2 = exp_map(x, w, c);
        CHECK((y2 - y).norm() < 1e-6 * (1.0 + y.norm()));
      }
    }
  }
}

TEST_CASE("distance") {
  SUBCASE("frozen value 2*artanh(0.5) = ln 3") {
    CHECK(distance(VectorXd::Zero(2), vec2(0.5, 0.0), 1.0) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-14));
  }
  SUBCASE("identity and symmetry") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
      VectorXd x = random_in_ball(3, 1.0, rng);
      VectorXd y = random_in_ball(3, 1.0, rng);
      CHECK(distance(x, x, 1.0) == 0.0);
      CHECK(distance(x, y, 1.0) == doctest::Approx(distance(y, x, 1.0)).epsilon(1e-12));
    }
  }
  SUBCASE("triangle inequality on sampled triples") {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 2000; ++i) {
      VectorXd x = random_in_ball(3, 1.0, rng);
      VectorXd y = random_in_ball(3, 1.0, rng);
      VectorXd z = random_in_ball(3, 1.0, rng);
      CHECK(distance(x, z, 1.0) <= distance(x, y, 1.0) + distance(y, z, 1.0) + 1e-9);
    }
  }
}

TEST_CASE("safe projection") {
  SUBCASE("inside the shell is untouched") {
    const BallConfig cfg(1.0, 1e-5);
    VectorXd p = vec2(0.5, 0.0);
    VectorXd out = safe_project(p, cfg);
    CHECK(out[0] == 0.5);
    CHECK(out[1] == 0.0);
  }
  SUBCASE("outside rescales to the shell radius") {
    const BallConfig cfg(1.0, 1e-5);
    VectorXd out = safe_project(vec2(2.0, 0.0), cfg);
    CHECK(out[0] == doctest::Approx(1.0 - 1e-5).epsilon(1e-14));
  }
  SUBCASE("shell radius scales with curvature") {
    const BallConfig cfg(0.25, 1e-3);
    VectorXd out = safe_project(vec2(3.0, 0.0), cfg);
    CHECK(out[0] == doctest::Approx(1.998).epsilon(1e-14));
  }
  SUBCASE("non-finite input is rejected") {
    const BallConfig cfg(1.0, 1e-5);
    CHECK_THROWS_AS(safe_project(vec2(std::nan(""), 0.0), cfg), std::invalid_argument);
  }
  SUBCASE("output always satisfies the shell bound") {
    std::mt19937_64 rng(31);
    for (double c : {0.25, 1.0, 4.0}) {
      const BallConfig cfg(c, 1e-5);
      for (int i = 0; i < 300; ++i) {
        VectorXd p(3);
        for (int j = 0; j < 3; ++j) p[j] = std::uniform_real_distribution<double>(-5, 5)(rng);
        VectorXd out = safe_project(p, cfg);
        CHECK(c * out.squaredNorm() <= (1.0 - 1e-5) * (1.0 - 1e-5) + 1e-12);
      }
    }
  }
}

TEST_CASE("hyperplane signed score") {
  SUBCASE("vanishes on the hyperplane") {
    CHECK(hyperplane_signed_score(vec2(0.0, 0.3), vec2(1.0, 0.0), 0.0, 1.0) == 0.0);
  }
  SUBCASE("frozen closed-form value ln(13/7)") {
    // oracle: asinh(0.6/0.91) = ln(13/7), exact rational simplification
    CHECK(hyperplane_signed_score(vec2(0.3, 0.0), vec2(1.0, 0.0), 0.0, 1.0) ==
          doctest::Approx(std::log(13.0 / 7.0)).epsilon(1e-14));
  }
  SUBCASE("negating the normal flips the sign, r = 0") {
    std::mt19937_64 rng(37);
    for (int i = 0; i < 200; ++i) {
      VectorXd x = random_in_ball(2, 1.0, rng);
      VectorXd a = vec2(0.8, -0.4);
      const double s = hyperplane_signed_score(x, a, 0.0, 1.0);
      const double sn = hyperplane_signed_score(x, VectorXd(-a), 0.0, 1.0);
      CHECK(sn == doctest::Approx(-s).epsilon(1e-12));
    }
  }
  SUBCASE("negating both normal and offset flips the sign") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 200; ++i) {
      VectorXd x = random_in_ball(2, 1.0, rng);
      VectorXd a = vec2(0.5, 0.7);
      const double s = hyperplane_signed_score(x, a, 0.35, 1.0);
      const double sn = hyperplane_signed_score(x, VectorXd(-a), -0.35, 1.0);
      CHECK(sn == doctest::Approx(-s).epsilon(1e-12));
    }
  }
  SUBCASE("degenerate normal is rejected") {
    CHECK_THROWS_AS(hyperplane_signed_score(vec2(0.1, 0.1), vec2(0.0, 0.0), 0.0, 1.0),
                    std::invalid_argument);
  }
  SUBCASE("monotone along the geodesic through the foot point") {
    const double c = 1.0;
    VectorXd a = vec2(0.7, -0.2);
    const double r = 0.4;
    VectorXd ahat = a.normalized();
    VectorXd q = exp_map_origin(r * ahat, c);
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 40; ++i) {
      const double t = -2.0 + 4.0 * i / 40.0;
      VectorXd x = exp_map(q, (t * ahat).eval(), c);
      const double s = hyperplane_signed_score(x, a, r, c);
      CHECK(s > prev);
      prev = s;
    }
    // the foot point itself scores zero
    CHECK(hyperplane_signed_score(q, a, r, c) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("ball point invariants") {
  const BallConfig cfg(1.0, 1e-5);
  CHECK_THROWS_AS(BallPoint(vec2(1.0, 0.0), cfg), std::invalid_argument);
  CHECK_THROWS_AS(BallPoint(vec2(0.8, 0.8), cfg), std::invalid_argument);
  CHECK_THROWS_AS(BallConfig(-1.0, 1e-5), std::invalid_argument);
  CHECK_THROWS_AS(BallConfig(1.0, 0.0), std::invalid_argument);
  CHECK_NOTHROW(BallPoint(vec2(0.8, 0.0), BallConfig(1.0, 1e-5)));
  // curvature 4 shrinks the ball to radius 1/2
  CHECK_THROWS_AS(BallPoint(vec2(0.8, 0.0), BallConfig(4.0, 1e-5)), std::invalid_argument);
}

TEST_CASE("guarded artanh nudges roundoff but rejects real violations") {
  CHECK(artanh_guarded(1.0) == doctest::Approx(std::atanh(std::nextafter(1.0, 0.0))));
  CHECK(artanh_guarded(1.0 + 5e-8) == artanh_guarded(1.0));
  CHECK_THROWS_AS(artanh_guarded(1.0 + 1e-6), std::domain_error);
  volatile double half = 0.5;  // keep libm's runtime rounding, not the folded constant
  CHECK(artanh_guarded(0.5) == std::atanh(half));
  CHECK(artanh_guarded(-1.0) == -artanh_guarded(1.0));
}
