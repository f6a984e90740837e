#include <cmath>
#include <limits>

#include "doctest.h"
#include "fdcnet/ops.hpp"
#include "fdcnet/tensor.hpp"

using namespace fdcnet;

TEST_CASE("construction validates shape and finiteness") {
  CHECK_NOTHROW(Tensor({2, 3}, std::vector<double>(6, 1.0)));
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 1.0)), ShapeError);
  CHECK_THROWS_AS(Tensor({0, 3}, {}), ShapeError);
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::quiet_NaN()}), NonFiniteError);
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::infinity()}), NonFiniteError);
}

TEST_CASE("op results that overflow are rejected with the op name") {
  Tensor x({1}, {1e300});
  try {
    ops::mul(x, x);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("mul") != std::string::npos);
  }
}

TEST_CASE("indexing") {
  Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
  CHECK(t.at({1, 2}) == 5);
  CHECK(t.at({0, 1}) == 1);
  CHECK_THROWS_AS(t.at({2, 0}), ShapeError);
  CHECK_THROWS_AS(t.item(), ContractError);
}

TEST_CASE("backward of sum gives all-ones") {
  Tensor x({2, 3, 4}, std::vector<double>(24, 0.7), true);
  backward(ops::sum_all(x));
  REQUIRE(x.has_grad());
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of half squared norm gives x") {
  Tensor x({5}, {1.5, -2.0, 0.25, 3.0, -0.5}, true);
  backward(ops::scale(ops::sum_all(ops::mul(x, x)), 0.5));
  for (std::size_t i = 0; i < 5; ++i) CHECK(x.grad()[i] == doctest::Approx(x[i]).epsilon(1e-15));
}

TEST_CASE("backward rejects non-scalar losses and clears the tape") {
  Tensor x({3}, {1, 2, 3}, true);
  auto y = ops::scale(x, 2.0);
  CHECK_THROWS_AS(backward(y), ContractError);
  backward(ops::sum_all(y));
  CHECK(GradTape::active().size() == 0);
  CHECK(x.grad()[0] == 2.0);
}

TEST_CASE("backward on a constant loss is a contract error") {
  Tensor x({3}, {1, 2, 3});
  CHECK_THROWS_AS(backward(ops::sum_all(x)), ContractError);
}

TEST_CASE("tape records in execution order and replays in reverse") {
  GradTape::active().clear();
  Tensor x({2}, {1, 2}, true);
  auto a = ops::scale(x, 3.0);
  auto b = ops::add_scalar(a, 1.0);
  auto c = ops::sum_all(b);
  const auto& nodes = GradTape::active().nodes();
  REQUIRE(nodes.size() == 3);
  CHECK(std::string(nodes[0].op) == "scale");
  CHECK(std::string(nodes[1].op) == "add_scalar");
  CHECK(std::string(nodes[2].op) == "sum_all");
  backward(c);
  CHECK(x.grad()[0] == 3.0);
  CHECK(x.grad()[1] == 3.0);
}

TEST_CASE("no-grad guard suppresses recording") {
  GradTape::active().clear();
  Tensor x({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    auto y = ops::scale(x, 2.0);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(GradTape::active().size() == 0);
  CHECK(ops::scale(x, 2.0).requires_grad());
  GradTape::active().clear();
}

TEST_CASE("gradients accumulate across uses of the same leaf") {
  Tensor x({1}, {3.0}, true);
  backward(ops::mul(x, x));  // d/dx x^2 = 6
  CHECK(x.grad()[0] == 6.0);
}
