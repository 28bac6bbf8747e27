#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hypervq/diff/adam.hpp"
#include "testing.hpp"

using namespace hypervq;
using diff::Array;
using diff::Shape;
using diff::Tensor;
using hvqtest::grad_check;
using hvqtest::random_array;

TEST_CASE("elementwise binary ops match finite differences with broadcasting") {
  std::mt19937_64 rng(101);
  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&, const Tensor&)> op;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {"add", [](const Tensor& a, const Tensor& b) { return a + b; }, -1, 1},
      {"sub", [](const Tensor& a, const Tensor& b) { return a - b; }, -1, 1},
      {"mul", [](const Tensor& a, const Tensor& b) { return a * b; }, -1, 1},
      {"div", [](const Tensor& a, const Tensor& b) { return a / b; }, 0.5, 2.0},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    for (int rep = 0; rep < 20; ++rep) {
      Array w = random_array(6, rng);
      auto fn = [&](const std::vector<Tensor>& in) {
        return diff::sum(c.op(in[0], in[1]) * Tensor::from_values({2, 3}, w));
      };
      // same-shape and broadcast variants
      CHECK(grad_check(fn, {{2, 3}, {2, 3}},
                       {random_array(6, rng, c.lo, c.hi), random_array(6, rng, c.lo, c.hi)}) <
            1e-4);
      CHECK(grad_check(fn, {{2, 3}, {1, 3}},
                       {random_array(6, rng, c.lo, c.hi), random_array(3, rng, c.lo, c.hi)}) <
            1e-4);
      CHECK(grad_check(fn, {{2, 3}, {1}},
                       {random_array(6, rng, c.lo, c.hi), random_array(1, rng, c.lo, c.hi)}) <
            1e-4);
    }
  }
}

TEST_CASE("elementwise unary ops match finite differences") {
  std::mt19937_64 rng(102);
  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&)> op;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {"neg", [](const Tensor& a) { return -a; }, -1, 1},
      {"relu", [](const Tensor& a) { return diff::relu(a); }, -1, 1},
      {"tanh", [](const Tensor& a) { return diff::tanh(a); }, -2, 2},
      {"artanh", [](const Tensor& a) { return diff::artanh(a); }, -0.9, 0.9},
      {"asinh", [](const Tensor& a) { return diff::asinh(a); }, -3, 3},
      {"exp", [](const Tensor& a) { return diff::exp(a); }, -2, 2},
      {"log", [](const Tensor& a) { return diff::log(a); }, 0.2, 3.0},
      {"sqrt", [](const Tensor& a) { return diff::sqrt(a); }, 0.2, 3.0},
      {"square", [](const Tensor& a) { return diff::square(a); }, -2, 2},
      {"pow2.5", [](const Tensor& a) { return diff::pow(a, 2.5); }, 0.2, 2.0},
      {"tanhc", [](const Tensor& a) { return diff::tanhc(a); }, -2, 2},
      {"atanhc", [](const Tensor& a) { return diff::atanhc(a); }, -0.9, 0.9},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    for (int rep = 0; rep < 20; ++rep) {
      Array w = random_array(6, rng);
      auto fn = [&](const std::vector<Tensor>& in) {
        return diff::sum(c.op(in[0]) * Tensor::from_values({2, 3}, w));
      };
      CHECK(grad_check(fn, {{2, 3}}, {random_array(6, rng, c.lo, c.hi)}) < 1e-4);
    }
  }
}

TEST_CASE("tanhc and atanhc are exact at the origin") {
  Tensor z = Tensor::from_values({3}, std::vector<double>{0.0, 1e-9, -1e-9});
  CHECK(diff::tanhc(z).values()[0] == 1.0);
  CHECK(diff::atanhc(z).values()[0] == 1.0);
  CHECK(diff::tanhc(z).values()[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(diff::atanhc(z).values()[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("artanh domain policy") {
  CHECK_NOTHROW(diff::artanh(Tensor::from_values({1}, std::vector<double>{1.0})));
  CHECK_THROWS_AS(diff::artanh(Tensor::from_values({1}, std::vector<double>{1.0 + 1e-6})),
                  std::domain_error);
}

TEST_CASE("shape ops match finite differences") {
  std::mt19937_64 rng(103);
  for (int rep = 0; rep < 20; ++rep) {
    Array w = random_array(12, rng);
    auto fn_reshape = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::reshape(in[0], {3, 4}) * Tensor::from_values({3, 4}, w));
    };
    CHECK(grad_check(fn_reshape, {{2, 6}}, {random_array(12, rng)}) < 1e-4);

    auto fn_bcast = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::broadcast_to(in[0], {3, 4}) * Tensor::from_values({3, 4}, w));
    };
    CHECK(grad_check(fn_bcast, {{1, 4}}, {random_array(4, rng)}) < 1e-4);

    auto fn_perm = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::permute(in[0], {1, 0}) * Tensor::from_values({4, 3}, w));
    };
    CHECK(grad_check(fn_perm, {{3, 4}}, {random_array(12, rng)}) < 1e-4);

    auto fn_cat = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::concat({in[0], in[1]}, 1) * Tensor::from_values({2, 6}, w));
    };
    CHECK(grad_check(fn_cat, {{2, 2}, {2, 4}}, {random_array(4, rng), random_array(8, rng)}) <
          1e-4);
  }
}

TEST_CASE("permute reorders values") {
  Tensor t = Tensor::from_values({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor p = diff::permute(t, {1, 0});
  CHECK(p.shape() == Shape{3, 2});
  CHECK(p.values()[0] == 1);
  CHECK(p.values()[1] == 4);
  CHECK(p.values()[2] == 2);
  CHECK(p.values()[5] == 6);
}

TEST_CASE("reductions match finite differences") {
  std::mt19937_64 rng(104);
  for (int rep = 0; rep < 20; ++rep) {
    auto fn_sum = [&](const std::vector<Tensor>& in) { return diff::sum(in[0]); };
    CHECK(grad_check(fn_sum, {{2, 3}}, {random_array(6, rng)}) < 1e-4);

    Array w = random_array(3, rng);
    auto fn_sum_axis = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::sum(in[0], 0, false) * Tensor::from_values({3}, w));
    };
    CHECK(grad_check(fn_sum_axis, {{2, 3}}, {random_array(6, rng)}) < 1e-4);

    Array w2 = random_array(2, rng);
    auto fn_mean_axis = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::mean(in[0], -1, false) * Tensor::from_values({2}, w2));
    };
    CHECK(grad_check(fn_mean_axis, {{2, 3}}, {random_array(6, rng)}) < 1e-4);

    auto fn_dot = [&](const std::vector<Tensor>& in) { return diff::dot(in[0], in[1]); };
    CHECK(grad_check(fn_dot, {{5}, {5}}, {random_array(5, rng), random_array(5, rng)}) < 1e-4);

    auto fn_norm = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::l2_norm(in[0], -1, true) * Tensor::from_values({2, 1}, w2));
    };
    CHECK(grad_check(fn_norm, {{2, 3}}, {random_array(6, rng, 0.3, 1.0)}) < 1e-4);
  }
}

TEST_CASE("matmul matches finite differences") {
  std::mt19937_64 rng(105);
  for (int rep = 0; rep < 20; ++rep) {
    Array w = random_array(8, rng);
    auto fn = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::matmul(in[0], in[1]) * Tensor::from_values({2, 4}, w));
    };
    CHECK(grad_check(fn, {{2, 3}, {3, 4}}, {random_array(6, rng), random_array(12, rng)}) < 1e-4);
  }
}

TEST_CASE("softmax rows are distributions and gradients check") {
  std::mt19937_64 rng(106);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor logits = Tensor::from_values({4, 5}, random_array(20, rng, -4, 4));
    Tensor s = diff::softmax(logits, -1);
    for (int i = 0; i < 4; ++i) {
      double total = 0.0;
      for (int j = 0; j < 5; ++j) {
        const double p = s.values()[i * 5 + j];
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        total += p;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    Array w = random_array(20, rng);
    auto fn = [&](const std::vector<Tensor>& in) {
      return diff::sum(diff::softmax(in[0], -1) * Tensor::from_values({4, 5}, w));
    };
    CHECK(grad_check(fn, {{4, 5}}, {random_array(20, rng, -3, 3)}) < 1e-4);
  }
}

TEST_CASE("cross entropy and mse match finite differences") {
  std::mt19937_64 rng(107);
  const std::vector<int> labels = {2, 0, 1, 3};
  for (int rep = 0; rep < 20; ++rep) {
    auto fn_ce = [&](const std::vector<Tensor>& in) { return diff::cross_entropy(in[0], labels); };
    CHECK(grad_check(fn_ce, {{4, 4}}, {random_array(16, rng, -2, 2)}) < 1e-4);

    auto fn_mse = [&](const std::vector<Tensor>& in) { return diff::mse(in[0], in[1]); };
    CHECK(grad_check(fn_mse, {{2, 3}, {2, 3}}, {random_array(6, rng), random_array(6, rng)}) <
          1e-4);
  }
  CHECK_THROWS_AS(diff::cross_entropy(Tensor::zeros({2, 3}), {0}), std::invalid_argument);
  CHECK_THROWS_AS(diff::cross_entropy(Tensor::zeros({2, 3}), {0, 5}), std::invalid_argument);
}

TEST_CASE("mse of identical tensors is zero with zero gradient") {
  Tensor x = Tensor::from_values({2, 2}, std::vector<double>{1, 2, 3, 4}, true);
  Tensor loss = diff::mse(x, x.detach());
  CHECK(loss.item() == 0.0);
  diff::backward(loss);
  CHECK(x.grad().abs().maxCoeff() == 0.0);
}

TEST_CASE("conv2d") {
  std::mt19937_64 rng(108);
  SUBCASE("1x1 identity kernel passes input through") {
    Tensor x = Tensor::from_values({2, 1, 3, 3}, random_array(18, rng));
    Tensor w = Tensor::from_values({1, 1, 1, 1}, std::vector<double>{1.0});
    Tensor y = diff::conv2d(x, w, 1, 0);
    CHECK(y.shape() == Shape{2, 1, 3, 3});
    for (Eigen::Index i = 0; i < 18; ++i) CHECK(y.values()[i] == x.values()[i]);
  }
  SUBCASE("shape arithmetic with stride and padding") {
    Tensor x = Tensor::zeros({1, 2, 8, 8});
    Tensor w = Tensor::zeros({3, 2, 4, 4});
    CHECK(diff::conv2d(x, w, 2, 1).shape() == Shape{1, 3, 4, 4});
  }
  SUBCASE("gradients match finite differences") {
    for (int rep = 0; rep < 20; ++rep) {
      Array w = random_array(2 * 2 * 2 * 2, rng);
      auto fn = [&](const std::vector<Tensor>& in) {
        return diff::sum(diff::conv2d(in[0], in[1], 2, 1) *
                         Tensor::from_values({2, 2, 2, 2}, w));
      };
      CHECK(grad_check(fn, {{2, 3, 4, 4}, {2, 3, 3, 3}},
                       {random_array(96, rng), random_array(54, rng)}) < 1e-4);
    }
  }
}

TEST_CASE("conv_transpose2d") {
  std::mt19937_64 rng(109);
  SUBCASE("shape arithmetic inverts conv2d") {
    Tensor x = Tensor::zeros({1, 3, 4, 4});
    Tensor w = Tensor::zeros({3, 2, 4, 4});
    CHECK(diff::conv_transpose2d(x, w, 2, 1).shape() == Shape{1, 2, 8, 8});
  }
  SUBCASE("adjoint identity against conv2d") {
    // <conv(x), y> == <x, convT(y)> for matching geometry
    Tensor x = Tensor::from_values({1, 2, 6, 6}, random_array(72, rng));
    Tensor w = Tensor::from_values({3, 2, 4, 4}, random_array(96, rng));
    Tensor y = Tensor::from_values({1, 3, 3, 3}, random_array(27, rng));
    Tensor lhs = diff::dot(diff::conv2d(x, w, 2, 1), y);
    // the same [3,2,4,4] buffer reads as [IC=3,OC=2,kh,kw] on the transpose side
    Tensor rhs = diff::dot(x, diff::conv_transpose2d(y, w, 2, 1));
    CHECK(lhs.item() == doctest::Approx(rhs.item()).epsilon(1e-10));
  }
  SUBCASE("gradients match finite differences") {
    for (int rep = 0; rep < 20; ++rep) {
      Array w = random_array(2 * 2 * 5 * 5, rng);
      auto fn = [&](const std::vector<Tensor>& in) {
        return diff::sum(diff::conv_transpose2d(in[0], in[1], 2, 1) *
                         Tensor::from_values({2, 2, 5, 5}, w));
      };
      CHECK(grad_check(fn, {{2, 3, 3, 3}, {3, 2, 3, 3}},
                       {random_array(54, rng), random_array(54, rng)}) < 1e-4);
    }
  }
}

TEST_CASE("straight through estimator") {
  Tensor hard = Tensor::from_values({2, 2}, std::vector<double>{1, 0, 0, 1}, true);
  Tensor soft = Tensor::from_values({2, 2}, std::vector<double>{0.7, 0.3, 0.4, 0.6}, true);
  Tensor st = diff::straight_through(hard, soft);
  for (int i = 0; i < 4; ++i) CHECK(st.values()[i] == hard.values()[i]);
  diff::backward(diff::sum(st));
  CHECK_FALSE(hard.has_grad());
  REQUIRE(soft.has_grad());
  for (int i = 0; i < 4; ++i) CHECK(soft.grad()[i] == 1.0);
  CHECK_THROWS_AS(diff::straight_through(Tensor::zeros({2}), Tensor::zeros({3})),
                  std::invalid_argument);
}

TEST_CASE("backward semantics") {
  SUBCASE("sum gives all-ones gradient") {
    Tensor x = Tensor::from_values({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}, true);
    diff::backward(diff::sum(x));
    for (int i = 0; i < 6; ++i) CHECK(x.grad()[i] == 1.0);
  }
  SUBCASE("dot(x,x) gives 2x") {
    Tensor x = Tensor::from_values({3}, std::vector<double>{1, -2, 3}, true);
    diff::backward(diff::dot(x, x));
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 2.0 * x.values()[i]);
  }
  SUBCASE("non-scalar loss is rejected") {
    Tensor x = Tensor::from_values({2}, std::vector<double>{1, 2}, true);
    CHECK_THROWS_AS(diff::backward(x + x), std::invalid_argument);
  }
  SUBCASE("double sweep without re-forward is an error") {
    Tensor x = Tensor::from_values({2}, std::vector<double>{1, 2}, true);
    Tensor loss = diff::sum(x);
    diff::backward(loss);
    CHECK_THROWS_AS(diff::backward(loss), std::logic_error);
  }
  SUBCASE("shared subexpressions accumulate") {
    // loss = sum(y) + sum(y*y) with shared y = 2x; tree-expanded oracle:
    // d/dx = 2 + 8x
    Tensor x = Tensor::from_values({3}, std::vector<double>{0.5, -1.0, 2.0}, true);
    Tensor y = x * 2.0;
    diff::backward(diff::sum(y) + diff::sum(y * y));
    for (int i = 0; i < 3; ++i) {
      CHECK(x.grad()[i] == doctest::Approx(2.0 + 8.0 * x.values()[i]).epsilon(1e-12));
    }
  }
  SUBCASE("detach blocks gradient flow") {
    Tensor x = Tensor::from_values({3}, std::vector<double>{1, 2, 3}, true);
    Tensor loss = diff::sum(x.detach() * x);
    diff::backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == x.values()[i]);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from_values({2}, std::vector<double>{1.0, -1.0}, true);
    std::vector<Tensor> params = {p};
    diff::AdamState st(0.1);
    diff::backward(diff::sum(p * 0.0));
    diff::adam_step(params, st);
    CHECK(p.values()[0] == 1.0);
    CHECK(p.values()[1] == -1.0);
  }
  SUBCASE("first step with unit gradient moves by about -lr") {
    // oracle: m_hat = 1, v_hat = 1 -> delta = -lr/(1+eps)
    Tensor p = Tensor::from_values({1}, std::vector<double>{0.5}, true);
    std::vector<Tensor> params = {p};
    diff::AdamState st(0.01);
    diff::backward(diff::sum(p));
    diff::adam_step(params, st);
    CHECK(p.values()[0] == doctest::Approx(0.5 - 0.01 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("quadratic bowl descends monotonically") {
    // bias-corrected steps are ~lr while far from the optimum; 200 * 3e-4
    // cannot overshoot zero from x = 1
    Tensor p = Tensor::from_values({1}, std::vector<double>{1.0}, true);
    std::vector<Tensor> params = {p};
    diff::AdamState st(3e-4);
    double prev = 1.0;
    for (int i = 0; i < 200; ++i) {
      diff::backward(diff::sum(p * p));
      diff::adam_step(params, st);
      diff::clear_grads(params);
      CHECK(std::abs(p.values()[0]) < prev);
      prev = std::abs(p.values()[0]);
    }
    CHECK(prev < 0.95);
  }
  SUBCASE("missing gradient is an error") {
    Tensor p = Tensor::from_values({1}, std::vector<double>{1.0}, true);
    std::vector<Tensor> params = {p};
    diff::AdamState st(0.01);
    CHECK_THROWS_AS(diff::adam_step(params, st), std::runtime_error);
  }
}
