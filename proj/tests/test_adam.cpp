#include "flowseg/adam.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace flowseg;

TEST_CASE("zero gradients leave parameters unchanged") {
  std::vector<Tensor> params{Tensor::from_values({3}, {1.0, -2.0, 0.5})};
  std::vector<Tensor> grads{Tensor::zeros({3})};
  AdamState state = init_adam(params);
  const Tensor before = params[0];
  adam_step(params, grads, state, 0.1);
  CHECK((params[0].data == before.data).all());
  CHECK(state.step == 1);
}

TEST_CASE("first step moves by about lr in the gradient direction") {
  std::vector<Tensor> params{Tensor::from_values({1}, {0.0})};
  std::vector<Tensor> grads{Tensor::from_values({1}, {1.0})};
  AdamState state = init_adam(params);
  adam_step(params, grads, state, 0.1);
  // bias correction makes m-hat = g and v-hat = g^2 at step 1
  CHECK(params[0](0) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("library update equals the scalar recurrence run directly") {
  // independent oracle: the textbook recurrence on plain doubles
  double p = 1.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  std::vector<Tensor> params{Tensor::from_values({1}, {1.0})};
  AdamState state = init_adam(params);

  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * p;  // d/dp p^2
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    p -= lr * mh / (std::sqrt(vh) + eps);

    std::vector<Tensor> grads{Tensor::from_values({1}, {2.0 * params[0](0)})};
    adam_step(params, grads, state, lr);
    CHECK(params[0](0) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(std::abs(params[0](0)) < 0.1);
  CHECK(state.step == 100);
}

TEST_CASE("shape misalignment is rejected") {
  std::vector<Tensor> params{Tensor::zeros({2})};
  std::vector<Tensor> grads{Tensor::zeros({3})};
  AdamState state = init_adam(params);
  CHECK_THROWS_AS(adam_step(params, grads, state, 0.1), std::invalid_argument);

  std::vector<Tensor> too_many{Tensor::zeros({2}), Tensor::zeros({2})};
  CHECK_THROWS_AS(adam_step(too_many, grads, state, 0.1), std::invalid_argument);
}

TEST_CASE("moments start at zero") {
  std::vector<Tensor> params{Tensor::from_values({2}, {1.0, 2.0})};
  AdamState state = init_adam(params);
  CHECK(state.step == 0);
  CHECK((state.m[0].data == 0.0).all());
  CHECK((state.v[0].data == 0.0).all());
}
