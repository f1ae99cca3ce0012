#include "doctest.h"

#include <cmath>

#include "pc2dae/ops.hpp"
#include "pc2dae/tensor.hpp"

using namespace pc2dae;
using namespace pc2dae::ad;

TEST_SUITE("tensor") {

TEST_CASE("factories produce the requested shapes and values") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.ndim() == 2);
  CHECK(z.dim(0) == 2);
  CHECK(z.dim(1) == 3);
  CHECK(z.size() == 6);
  CHECK(z.values().abs().maxCoeff() == 0.0);

  Tensor f = Tensor::full({4}, -2.5);
  CHECK(f.size() == 4);
  CHECK(f.values().minCoeff() == -2.5);
  CHECK(f.values().maxCoeff() == -2.5);

  Tensor s = Tensor::scalar(7.0);
  CHECK(s.size() == 1);
  CHECK(s.item() == 7.0);
}

TEST_CASE("from_array rejects a size mismatch") {
  Array v = Array::Zero(5);
  CHECK_THROWS_AS(Tensor::from_array({2, 3}, v), shape_error);
}

TEST_CASE("item rejects non-scalar tensors") {
  Tensor t = Tensor::zeros({2});
  CHECK_THROWS_AS(t.item(), shape_error);
}

TEST_CASE("backward on sum(w * x) yields grad w = x") {
  Array xv(4), wv(4);
  xv << 1.0, -2.0, 3.0, 0.5;
  wv << 0.25, 0.5, -1.0, 2.0;
  Tensor x = Tensor::from_array({4}, xv);
  Tensor w = Tensor::from_array({4}, wv, /*requires_grad=*/true);

  Tensor loss = sum(mul(w, x));
  backward(loss);

  REQUIRE(w.node()->has_grad());
  for (Index i = 0; i < 4; ++i) {
    CHECK(w.grad()(i) == doctest::Approx(xv(i)).epsilon(1e-12));
  }
  CHECK_FALSE(x.node()->has_grad());
}

TEST_CASE("backward requires a scalar root") {
  Tensor x = Tensor::zeros({3}, /*requires_grad=*/true);
  Tensor y = scale(x, 2.0);
  CHECK_THROWS_AS(backward(y), shape_error);
}

TEST_CASE("gradients accumulate across reuse of the same tensor") {
  Tensor w = Tensor::from_array({2}, (Array(2) << 3.0, -1.0).finished(),
                                /*requires_grad=*/true);
  // loss = sum(w) + sum(2 w): every coordinate contributes 1 + 2.
  Tensor loss = add(sum(w), sum(scale(w, 2.0)));
  backward(loss);
  CHECK(w.grad()(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(w.grad()(1) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("repeated backward accumulates until zero_grad clears") {
  Tensor w = Tensor::full({3}, 1.0, /*requires_grad=*/true);
  backward(sum(w));
  backward(sum(w));
  CHECK(w.grad()(0) == doctest::Approx(2.0).epsilon(1e-12));
  w.zero_grad();
  CHECK(w.grad()(0) == 0.0);
  backward(sum(w));
  CHECK(w.grad()(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("requires_grad propagates through op results") {
  Tensor a = Tensor::zeros({2}, /*requires_grad=*/true);
  Tensor b = Tensor::zeros({2});
  CHECK(add(a, b).requires_grad());
  CHECK(add(b, b).requires_grad() == false);
}

TEST_CASE("NoGradGuard detaches results built under it") {
  Tensor w = Tensor::full({2}, 1.0, /*requires_grad=*/true);
  {
    NoGradGuard guard;
    Tensor y = scale(w, 4.0);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
  }
  CHECK(GradMode::enabled());
  Tensor y = scale(w, 4.0);
  CHECK(y.requires_grad());
}

TEST_CASE("NoGradGuard nests and restores the previous mode") {
  CHECK(GradMode::enabled());
  {
    NoGradGuard outer;
    CHECK_FALSE(GradMode::enabled());
    {
      NoGradGuard inner;
      CHECK_FALSE(GradMode::enabled());
    }
    CHECK_FALSE(GradMode::enabled());
  }
  CHECK(GradMode::enabled());
}

TEST_CASE("grad on a leaf that never saw backward reads as zeros") {
  Tensor w = Tensor::full({3}, 2.0, /*requires_grad=*/true);
  CHECK(w.grad().size() == 3);
  CHECK(w.grad().abs().maxCoeff() == 0.0);
}

TEST_CASE("diamond-shaped graphs sum both paths") {
  // loss = sum(w*w + 3w), d/dw = 2w + 3.
  Tensor w = Tensor::from_array({2}, (Array(2) << 1.5, -0.5).finished(),
                                /*requires_grad=*/true);
  Tensor loss = sum(add(mul(w, w), scale(w, 3.0)));
  backward(loss);
  CHECK(w.grad()(0) == doctest::Approx(2.0 * 1.5 + 3.0).epsilon(1e-12));
  CHECK(w.grad()(1) == doctest::Approx(2.0 * -0.5 + 3.0).epsilon(1e-12));
}

TEST_CASE("mutable_values edits feed later forward passes") {
  Tensor w = Tensor::full({1}, 1.0, /*requires_grad=*/true);
  CHECK(sum(w).item() == 1.0);
  w.mutable_values()(0) = 5.0;
  CHECK(sum(w).item() == 5.0);
}

}  // TEST_SUITE("tensor")
