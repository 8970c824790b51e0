#include "flowseg/tensor.hpp"

#include <doctest.h>

using flowseg::Shape;
using flowseg::Tensor;

TEST_CASE("shape bookkeeping") {
  Tensor t = Tensor::zeros({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.rank() == 3);
  CHECK(flowseg::shape_str(t.shape) == "[2,3,4]");

  Tensor s = Tensor::scalar(7.0);
  CHECK(s.numel() == 1);
  CHECK(s.rank() == 0);
}

TEST_CASE("data length must match shape") {
  CHECK_THROWS_AS(Tensor({2, 2}, Eigen::ArrayXd::Zero(5)), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0, 2}, Eigen::ArrayXd::Zero(0)), std::invalid_argument);
}

TEST_CASE("indexing is row-major") {
  Tensor t = Tensor::from_values({2, 2, 2, 2},
                                 {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
  CHECK(t(0, 0, 0, 1) == 1.0);
  CHECK(t(0, 1, 0, 0) == 4.0);
  CHECK(t(1, 0, 0, 0) == 8.0);
  CHECK(t(1, 1, 1, 1) == 15.0);
}

TEST_CASE("reshape preserves data and rejects bad sizes") {
  Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  CHECK(r(2, 1) == 6.0);
  CHECK_THROWS_AS(t.reshaped({4, 2}), std::invalid_argument);
}

TEST_CASE("binary detection") {
  CHECK(Tensor::from_values({3}, {0, 1, 1}).is_binary());
  CHECK_FALSE(Tensor::from_values({3}, {0, 0.5, 1}).is_binary());
}
