#pragma once

#include "flowseg/tensor.hpp"

#include <functional>

namespace flowseg {

// Central-difference gradient of a scalar function of one tensor,
// (f(p + h*e_i) - f(p - h*e_i)) / (2h) per coordinate. Deliberately knows
// nothing about the autodiff tape so it can serve as its oracle.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& p,
                                  double h);

}  // namespace flowseg
