#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hypervq/geometry_diff.hpp"
#include "hypervq/quantizers.hpp"
#include "testing.hpp"

using namespace hypervq;
using diff::Array;
using diff::Shape;
using diff::Tensor;
using hvqtest::grad_check;
using hvqtest::random_array;

namespace {

// rows well inside the unit ball
Array ball_rows(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng, double scale = 0.35) {
  return random_array(n * d, rng, -scale, scale);
}

}  // namespace

TEST_CASE("differentiable ops agree with the scalar geometry layer") {
  std::mt19937_64 rng(201);
  const double c = 1.0;
  for (int rep = 0; rep < 50; ++rep) {
    Array xv = ball_rows(4, 3, rng), yv = ball_rows(4, 3, rng);
    Tensor x = Tensor::from_values({4, 3}, xv), y = Tensor::from_values({4, 3}, yv);

    Tensor m = geometry::mobius_add(x, y, c);
    Tensor e = geometry::exp_map_origin(x, c);
    Tensor l = geometry::log_map_origin(x, c);
    Tensor dist = geometry::distance(x, y, c);
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd xr = Eigen::Map<const Eigen::VectorXd>(xv.data() + i * 3, 3);
      Eigen::VectorXd yr = Eigen::Map<const Eigen::VectorXd>(yv.data() + i * 3, 3);
      Eigen::VectorXd mr = geometry::mobius_add(xr, yr, c);
      Eigen::VectorXd er = geometry::exp_map_origin(xr, c);
      Eigen::VectorXd lr = geometry::log_map_origin(xr, c);
      for (int j = 0; j < 3; ++j) {
        CHECK(m.values()[i * 3 + j] == doctest::Approx(mr[j]).epsilon(1e-12));
        CHECK(e.values()[i * 3 + j] == doctest::Approx(er[j]).epsilon(1e-12));
        CHECK(l.values()[i * 3 + j] == doctest::Approx(lr[j]).epsilon(1e-12));
      }
      CHECK(dist.values()[i] == doctest::Approx(geometry::distance(xr, yr, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("safe projection branches and stays differentiable") {
  const geometry::BallConfig cfg(1.0, 1e-5);
  Array v(6);
  v << 0.1, 0.2, 0.0, 3.0, 4.0, 0.0;  // row 0 inside, row 1 outside
  Tensor p = Tensor::from_values({2, 3}, v);
  Tensor out = geometry::safe_project(p, cfg);
  CHECK(out.values()[0] == 0.1);
  CHECK(out.values()[1] == 0.2);
  const double n1 = std::hypot(out.values()[3], out.values()[4]);
  CHECK(n1 == doctest::Approx(1.0 - 1e-5).epsilon(1e-12));

  // all-zero row survives (no division by zero)
  Tensor z = Tensor::from_values({1, 3}, Array(Array::Zero(3)));
  Tensor zo = geometry::safe_project(z, cfg);
  CHECK(zo.values().abs().maxCoeff() == 0.0);

  std::mt19937_64 rng(202);
  for (int rep = 0; rep < 20; ++rep) {
    Array w = random_array(6, rng);
    auto fn = [&](const std::vector<Tensor>& in) {
      return diff::sum(geometry::safe_project(in[0], cfg) * Tensor::from_values({2, 3}, w));
    };
    // mix of inside and outside rows
    Array init(6);
    init.segment(0, 3) = random_array(3, rng, -0.4, 0.4);
    init.segment(3, 3) = random_array(3, rng, 1.5, 2.5);
    CHECK(grad_check(fn, {{2, 3}}, {init}) < 1e-4);
  }
}

TEST_CASE("composed hyperbolic gradients pass finite-difference checks") {
  std::mt19937_64 rng(203);
  const double c = 1.0;
  for (int rep = 0; rep < 20; ++rep) {
    Array w = random_array(6, rng);
    Tensor wt = Tensor::from_values({2, 3}, w);

    auto fn_exp = [&](const std::vector<Tensor>& in) {
      return diff::sum(geometry::exp_map_origin(in[0], c) * wt);
    };
    CHECK(grad_check(fn_exp, {{2, 3}}, {random_array(6, rng, -1.5, 1.5)}) < 1e-4);

    auto fn_log = [&](const std::vector<Tensor>& in) {
      return diff::sum(geometry::log_map_origin(in[0], c) * wt);
    };
    CHECK(grad_check(fn_log, {{2, 3}}, {ball_rows(2, 3, rng)}) < 1e-4);

    auto fn_mob = [&](const std::vector<Tensor>& in) {
      return diff::sum(geometry::mobius_add(in[0], in[1], c) * wt);
    };
    CHECK(grad_check(fn_mob, {{2, 3}, {2, 3}}, {ball_rows(2, 3, rng), ball_rows(2, 3, rng)}) <
          1e-4);

    Array w2 = random_array(2, rng);
    auto fn_dist = [&](const std::vector<Tensor>& in) {
      return diff::sum(geometry::distance(in[0], in[1], c) * Tensor::from_values({2, 1}, w2));
    };
    CHECK(grad_check(fn_dist, {{2, 3}, {2, 3}}, {ball_rows(2, 3, rng), ball_rows(2, 3, rng)}) <
          1e-4);
  }
}

TEST_CASE("hyperplane scores: values and gradients") {
  std::mt19937_64 rng(204);
  const double c = 1.0;

  SUBCASE("matches the scalar layer") {
    for (int rep = 0; rep < 50; ++rep) {
      Array xv = ball_rows(3, 2, rng);
      Array av = random_array(4, rng, -1.0, 1.0);
      Array rv = random_array(2, rng, -0.5, 0.5);
      Tensor s = geometry::hyperplane_signed_score(
          Tensor::from_values({3, 2}, xv), Tensor::from_values({2, 2}, av),
          Tensor::from_values({2, 1}, rv), c);
      REQUIRE(s.shape() == Shape{3, 2});
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 2; ++k) {
          Eigen::VectorXd xr = Eigen::Map<const Eigen::VectorXd>(xv.data() + i * 2, 2);
          Eigen::VectorXd ar = Eigen::Map<const Eigen::VectorXd>(av.data() + k * 2, 2);
          const double want = geometry::hyperplane_signed_score(xr, ar, rv[k], c);
          CHECK(s.values()[i * 2 + k] == doctest::Approx(want).epsilon(1e-11));
        }
      }
    }
  }

  SUBCASE("gradients through x, a and r") {
    for (int rep = 0; rep < 20; ++rep) {
      Array w = random_array(6, rng);
      auto fn = [&](const std::vector<Tensor>& in) {
        return diff::sum(
            geometry::hyperplane_signed_score(in[0], in[1], in[2], c) *
            Tensor::from_values({3, 2}, w));
      };
      CHECK(grad_check(fn, {{3, 2}, {2, 2}, {2, 1}},
                       {ball_rows(3, 2, rng), random_array(4, rng, 0.3, 1.0),
                        random_array(2, rng, -0.5, 0.5)}) < 1e-4);
    }
  }

  SUBCASE("degenerate normal is rejected") {
    Tensor x = Tensor::from_values({1, 2}, std::vector<double>{0.1, 0.1});
    Tensor a = Tensor::zeros({1, 2});
    Tensor r = Tensor::zeros({1, 1});
    CHECK_THROWS_AS(geometry::hyperplane_signed_score(x, a, r, c), std::invalid_argument);
  }
}

TEST_CASE("full hypervq logits gradient fidelity") {
  std::mt19937_64 rng(205);
  const geometry::BallConfig cfg(1.0, 1e-5);
  for (int rep = 0; rep < 20; ++rep) {
    Array w = random_array(8, rng);
    auto fn = [&](const std::vector<Tensor>& in) {
      return diff::sum(quant::hypervq_logits(in[0], in[1], in[2], cfg) *
                       Tensor::from_values({2, 4}, w));
    };
    CHECK(grad_check(fn, {{2, 3}, {4, 3}, {4, 1}},
                     {random_array(6, rng, -1.0, 1.0), random_array(12, rng, 0.3, 1.0),
                      random_array(4, rng, -0.5, 0.5)}) < 1e-4);
  }
}

TEST_CASE("exp-log roundtrip through the tape is near identity") {
  std::mt19937_64 rng(206);
  for (double c : {0.25, 1.0, 4.0}) {
    Tensor v = Tensor::from_values({8, 3}, random_array(24, rng, -1.2, 1.2), true);
    Tensor back = geometry::log_map_origin(geometry::exp_map_origin(v, c), c);
    CHECK((back.values() - v.values()).abs().maxCoeff() < 1e-6);
    // end-to-end gradient of sum(roundtrip) is all ones (identity Jacobian)
    diff::backward(diff::sum(back));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      CHECK(v.grad()[i] == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}
