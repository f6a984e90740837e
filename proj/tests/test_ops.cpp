#include <cmath>

#include "doctest.h"
#include "fdcnet/ops.hpp"
#include "gradcheck.hpp"

using namespace fdcnet;
using testing::grad_check;
using testing::random_tensor;
using testing::worst_rel_err;

namespace {

Tensor probe_loss(const Tensor& y, const Tensor& probe) { return ops::sum_all(ops::mul(y, probe)); }

constexpr double kOpTol = 1e-5;

}  // namespace

TEST_SUITE("matmul") {
  TEST_CASE("identity and hand arithmetic") {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor m({2, 2}, {1, 2, 3, 4});
    auto p = ops::matmul(eye, m);
    for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == m[i]);
    auto q = ops::matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4}));
    CHECK(q.shape() == Shape{1, 1});
    CHECK(q[0] == 11.0);
  }

  TEST_CASE("random 5x7 by 7x3 matches triple loop") {
    Rng rng(1);
    auto a = random_tensor({5, 7}, rng, 1.0, false);
    auto b = random_tensor({7, 3}, rng, 1.0, false);
    auto c = ops::matmul(a, b);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < 7; ++k) s += a.at({i, k}) * b.at({k, j});
        CHECK(std::abs(c.at({i, j}) - s) < 1e-12);
      }
  }

  TEST_CASE("shape mismatch names both shapes") {
    try {
      ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
      CHECK(msg.find("[4x2]") != std::string::npos);
    }
  }

  TEST_CASE("matmul, bmm and linear gradients") {
    Rng rng(2);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 5}, rng);
    auto probe = random_tensor({3, 5}, rng, 1.0, false);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::matmul(a, b), probe); }, {a, b})) < kOpTol);

    auto x = random_tensor({2, 3, 4}, rng);
    auto y = random_tensor({2, 4, 5}, rng);
    auto yt = random_tensor({2, 5, 4}, rng);
    auto p3 = random_tensor({2, 3, 5}, rng, 1.0, false);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::bmm(x, y), p3); }, {x, y})) < kOpTol);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::bmm(x, yt, true), p3); }, {x, yt})) < kOpTol);

    auto w = random_tensor({6, 4}, rng);
    auto bias = random_tensor({6}, rng);
    auto p4 = random_tensor({2, 3, 6}, rng, 1.0, false);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::linear(x, w, &bias), p4); }, {x, w, bias})) <
          kOpTol);
  }

  TEST_CASE("bmm transpose flag agrees with explicit transpose") {
    Rng rng(3);
    auto a = random_tensor({2, 3, 4}, rng, 1.0, false);
    auto b = random_tensor({2, 5, 4}, rng, 1.0, false);
    auto direct = ops::bmm(a, b, true);
    auto via = ops::bmm(a, ops::swap_last2(b));
    for (std::size_t i = 0; i < direct.numel(); ++i) CHECK(std::abs(direct[i] - via[i]) < 1e-13);
  }
}

TEST_SUITE("activations") {
  TEST_CASE("fixed points") {
    CHECK(ops::sigmoid(Tensor::scalar(0.0))[0] == 0.5);
    auto s = ops::softmax_last(Tensor({2}, {0.0, 0.0}));
    CHECK(s[0] == 0.5);
    CHECK(s[1] == 0.5);
    CHECK(ops::relu(Tensor({2}, {-1.0, 2.0}))[0] == 0.0);
    CHECK(ops::gelu(Tensor::scalar(0.0))[0] == 0.0);
  }

  TEST_CASE("dispatch by name") {
    CHECK(ops::parse_activation("gelu") == ops::Activation::gelu);
    CHECK_THROWS_AS(ops::parse_activation("swish"), ConfigError);
    auto y = ops::activation(Tensor::scalar(0.0), ops::parse_activation("sigmoid"));
    CHECK(y[0] == 0.5);
  }

  TEST_CASE("gelu gradient at 0.3 matches central difference to 1e-6") {
    Tensor x({1}, {0.3}, true);
    backward(ops::sum_all(ops::gelu(x)));
    const double h = 1e-5;
    auto f = [](double v) { return v * 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))); };
    const double numeric = (f(0.3 + h) - f(0.3 - h)) / (2 * h);
    CHECK(std::abs(x.grad()[0] - numeric) / std::abs(numeric) < 1e-6);
  }

  TEST_CASE("sigmoid saturates without overflow") {
    auto y = ops::sigmoid(Tensor({2}, {-800.0, 800.0}));
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 1.0);
  }

  TEST_CASE("softmax rows sum to one and gradients check") {
    Rng rng(4);
    auto x = random_tensor({3, 7}, rng, 3.0);
    auto s = ops::softmax_last(x);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0;
      for (std::size_t j = 0; j < 7; ++j) sum += s.at({r, j});
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    auto probe = random_tensor({3, 7}, rng, 1.0, false);
    for (auto kind : {ops::Activation::sigmoid, ops::Activation::relu, ops::Activation::gelu, ops::Activation::softmax})
      CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::activation(x, kind), probe); }, {x})) < kOpTol);
  }
}

TEST_SUITE("conv1d") {
  TEST_CASE("identity kernel and hand arithmetic") {
    auto y = ops::conv1d(Tensor({1, 1, 3}, {1, 2, 3}), Tensor({1, 1, 1}, {1}), nullptr, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 3});
    CHECK(y[0] == 1);
    CHECK(y[2] == 3);
    auto z = ops::conv1d(Tensor({1, 1, 4}, {1, 2, 3, 4}), Tensor({1, 1, 2}, {1, 1}), nullptr, 1, 0);
    REQUIRE(z.shape() == Shape{1, 1, 3});
    CHECK(z[0] == 3);
    CHECK(z[1] == 5);
    CHECK(z[2] == 7);
  }

  TEST_CASE("kernel larger than padded input") {
    CHECK_THROWS_AS(ops::conv1d(Tensor::zeros({1, 1, 3}), Tensor::zeros({1, 1, 6}), nullptr, 1, 1), ShapeError);
    CHECK_NOTHROW(ops::conv1d(Tensor::zeros({1, 1, 3}), Tensor::zeros({1, 1, 5}), nullptr, 1, 1));
  }

  TEST_CASE("random B=2 C=3 T=16 K=5 matches nested-loop oracle") {
    Rng rng(5);
    for (std::size_t stride : {1u, 2u})
      for (std::size_t pad : {0u, 2u}) {
        auto x = random_tensor({2, 3, 16}, rng, 1.0, false);
        auto w = random_tensor({4, 3, 5}, rng, 1.0, false);
        auto b = random_tensor({4}, rng, 1.0, false);
        auto y = ops::conv1d(x, w, &b, stride, pad);
        const std::size_t tout = (16 + 2 * pad - 5) / stride + 1;
        REQUIRE(y.shape() == Shape{2, 4, tout});
        for (std::size_t bi = 0; bi < 2; ++bi)
          for (std::size_t o = 0; o < 4; ++o)
            for (std::size_t t = 0; t < tout; ++t) {
              double s = b[o];
              for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t k = 0; k < 5; ++k) {
                  const long idx = static_cast<long>(t * stride + k) - static_cast<long>(pad);
                  if (idx >= 0 && idx < 16) s += w.at({o, c, k}) * x.at({bi, c, static_cast<std::size_t>(idx)});
                }
              CHECK(std::abs(y.at({bi, o, t}) - s) < 1e-12);
            }
      }
  }

  TEST_CASE("transposed: hand example and length formula") {
    auto y = ops::conv1d_transposed(Tensor({1, 1, 1}, {1}), Tensor({1, 1, 2}, {1, 1}), nullptr, 1, 0);
    REQUIRE(y.shape() == Shape{1, 1, 2});
    CHECK(y[0] == 1);
    CHECK(y[1] == 1);
    auto up = ops::conv1d_transposed(Tensor::zeros({1, 2, 4}), Tensor::zeros({2, 3, 2}), nullptr, 2, 0);
    CHECK(up.shape() == Shape{1, 3, 8});
    auto same = ops::conv1d_transposed(Tensor::zeros({2, 5, 128}), Tensor::zeros({5, 3, 7}), nullptr, 1, 3);
    CHECK(same.shape() == Shape{2, 3, 128});
  }

  TEST_CASE("transposed convolution is the adjoint of convolution") {
    Rng rng(6);
    struct Case {
      std::size_t T, K, stride, pad;
    };
    for (auto c : {Case{9, 3, 1, 1}, Case{12, 4, 2, 1}, Case{10, 5, 1, 0}, Case{11, 3, 2, 0}}) {
      auto x = random_tensor({2, 3, c.T}, rng, 1.0, false);
      auto w = random_tensor({4, 3, c.K}, rng, 1.0, false);
      auto cx = ops::conv1d(x, w, nullptr, c.stride, c.pad);
      auto y = random_tensor(cx.shape(), rng, 1.0, false);
      auto cty = ops::conv1d_transposed(y, w, nullptr, c.stride, c.pad);
      // convT may be shorter than x when stride does not divide evenly; compare the overlap.
      double lhs = 0, rhs = 0;
      for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
      const auto tt = cty.dim(2);
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t ch = 0; ch < 3; ++ch)
          for (std::size_t t = 0; t < std::min(tt, c.T); ++t) rhs += x.at({b, ch, t}) * cty.at({b, ch, t});
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }

  TEST_CASE("conv gradients") {
    Rng rng(7);
    auto x = random_tensor({2, 3, 10}, rng);
    auto w = random_tensor({4, 3, 3}, rng);
    auto b = random_tensor({4}, rng);
    for (std::size_t stride : {1u, 2u}) {
      auto probe = random_tensor(ops::conv1d(x, w, &b, stride, 1).shape(), rng, 1.0, false);
      CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::conv1d(x, w, &b, stride, 1), probe); },
                                     {x, w, b})) < kOpTol);
    }
    auto wt = random_tensor({3, 4, 5}, rng);
    auto bt = random_tensor({4}, rng);
    for (std::size_t stride : {1u, 2u}) {
      auto probe = random_tensor(ops::conv1d_transposed(x, wt, &bt, stride, 2).shape(), rng, 1.0, false);
      CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::conv1d_transposed(x, wt, &bt, stride, 2), probe); },
                                     {x, wt, bt})) < kOpTol);
    }
  }
}

TEST_SUITE("normalisation") {
  TEST_CASE("batch norm of a constant channel is zero") {
    ops::BatchNormState st{Tensor::zeros({2}), Tensor::full({2}, 1.0)};
    Tensor x({2, 2, 3}, {5, 5, 5, 1, 2, 3, 5, 5, 5, 4, 5, 6});
    auto y = ops::batch_norm(x, Tensor::full({2}, 1.0), Tensor::zeros({2}), st, 1e-5, true);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < 3; ++t) CHECK(y.at({b, 0, t}) == 0.0);
  }

  TEST_CASE("train-mode statistics and running-mean momentum") {
    Rng rng(8);
    auto x = random_tensor({4, 3, 9}, rng, 2.0, false);
    ops::BatchNormState st{Tensor::zeros({3}), Tensor::full({3}, 1.0)};
    const double eps = 1e-5;
    auto y = ops::batch_norm(x, Tensor::full({3}, 1.0), Tensor::zeros({3}), st, eps, true);
    for (std::size_t c = 0; c < 3; ++c) {
      double mu = 0, m2 = 0, xm = 0;
      for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t t = 0; t < 9; ++t) {
          mu += y.at({b, c, t});
          m2 += y.at({b, c, t}) * y.at({b, c, t});
          xm += x.at({b, c, t});
        }
      mu /= 36;
      xm /= 36;
      CHECK(std::abs(mu) < 1e-10);
      CHECK(std::abs(m2 / 36 - mu * mu - 1.0) < eps);
      CHECK(st.running_mean[c] == doctest::Approx(0.9 * 0.0 + 0.1 * xm).epsilon(1e-12));
    }
  }

  TEST_CASE("degenerate batch in train mode") {
    ops::BatchNormState st{Tensor::zeros({1}), Tensor::full({1}, 1.0)};
    CHECK_THROWS_AS(ops::batch_norm(Tensor::zeros({1, 1, 1}), Tensor::full({1}, 1.0), Tensor::zeros({1}), st, 1e-5, true),
                    DegenerateError);
    CHECK_NOTHROW(ops::batch_norm(Tensor::zeros({1, 1, 1}), Tensor::full({1}, 1.0), Tensor::zeros({1}), st, 1e-5, false));
  }

  TEST_CASE("eval mode uses running statistics") {
    ops::BatchNormState st{Tensor({1}, {2.0}), Tensor({1}, {4.0})};
    auto y = ops::batch_norm(Tensor({1, 1, 2}, {2.0, 6.0}), Tensor({1}, {3.0}), Tensor({1}, {1.0}), st, 0.0, false);
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(7.0));
    CHECK(st.running_mean[0] == 2.0);
  }

  TEST_CASE("batch norm and layer norm gradients") {
    Rng rng(9);
    auto x = random_tensor({3, 2, 5}, rng);
    auto g = random_tensor({2}, rng);
    auto b = random_tensor({2}, rng);
    auto probe = random_tensor({3, 2, 5}, rng, 1.0, false);
    for (bool train : {true, false}) {
      ops::BatchNormState st{Tensor({2}, {0.1, -0.2}), Tensor({2}, {1.5, 0.7})};
      CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::batch_norm(x, g, b, st, 1e-5, train), probe); },
                                     {x, g, b})) < kOpTol);
    }
    auto lg = random_tensor({5}, rng);
    auto lb = random_tensor({5}, rng);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::layer_norm(x, lg, lb), probe); }, {x, lg, lb})) <
          kOpTol);
  }
}

TEST_SUITE("plumbing") {
  TEST_CASE("expand broadcasts and sums back") {
    Tensor v({2, 1, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto e = ops::expand(v, {2, 4, 3});
    CHECK(e.at({1, 3, 2}) == 6);
    CHECK(e.at({0, 2, 1}) == 2);
    backward(ops::sum_all(e));
    for (double gv : v.grad()) CHECK(gv == 4.0);
    CHECK_THROWS_AS(ops::expand(v, {2, 4}), ShapeError);
    CHECK_THROWS_AS(ops::expand(v, {3, 4, 3}), ShapeError);
  }

  TEST_CASE("slicing, concatenation, transposes and reductions") {
    Rng rng(10);
    auto x = random_tensor({2, 3, 6}, rng);
    auto y = random_tensor({2, 3, 2}, rng);
    auto p1 = random_tensor({2, 3, 4}, rng, 1.0, false);
    auto p2 = random_tensor({2, 3, 8}, rng, 1.0, false);
    auto p3 = random_tensor({2, 6, 3}, rng, 1.0, false);
    auto p4 = random_tensor({2, 6}, rng, 1.0, false);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::slice_last(x, 1, 4), p1); }, {x})) < kOpTol);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::concat_last({x, y}), p2); }, {x, y})) < kOpTol);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::swap_last2(x), p3); }, {x})) < kOpTol);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::mean_axis(x, 1), p4); }, {x})) < kOpTol);
    CHECK(worst_rel_err(grad_check([&] { return ops::mean_all(ops::mul(x, x)); }, {x})) < kOpTol);

    auto parts = ops::concat_last({ops::slice_last(x, 0, 2), ops::slice_last(x, 2, 4)});
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(parts[i] == x[i]);
  }

  TEST_CASE("elementwise gradients") {
    Rng rng(11);
    auto a = random_tensor({4, 3}, rng);
    auto b = random_tensor({4, 3}, rng);
    auto probe = random_tensor({4, 3}, rng, 1.0, false);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::add(a, b), probe); }, {a, b})) < kOpTol);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::sub(a, b), probe); }, {a, b})) < kOpTol);
    CHECK(worst_rel_err(grad_check([&] { return probe_loss(ops::mul(a, b), probe); }, {a, b})) < kOpTol);
    CHECK(worst_rel_err(grad_check([&] { return ops::mse_loss(a, b); }, {a, b})) < kOpTol);
  }

  TEST_CASE("dropout is inverted and off in eval mode") {
    Rng rng(12);
    auto x = Tensor::full({1000}, 1.0);
    auto same = ops::dropout(x, 0.1, false, rng);
    CHECK(same.same_storage(x));
    auto y = ops::dropout(x, 0.1, true, rng);
    double kept = 0, sum = 0;
    for (double v : y.data()) {
      if (v != 0.0) {
        CHECK(v == doctest::Approx(1.0 / 0.9));
        ++kept;
      }
      sum += v;
    }
    CHECK(kept / 1000.0 == doctest::Approx(0.9).epsilon(0.05));
    CHECK_THROWS_AS(ops::dropout(x, 1.0, true, rng), ConfigError);
  }
}
