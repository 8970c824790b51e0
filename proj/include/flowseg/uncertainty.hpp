#pragma once

#include "flowseg/dataset.hpp"
#include "flowseg/tensor.hpp"

#include <span>

namespace flowseg {

// Per-pixel statistics of a set of binary masks. With binary inputs the
// population variance is exactly mean*(1-mean).
struct UncertaintyMap {
  Tensor mean;      // values in [0,1]
  Tensor variance;  // population variance (divide by M), values in [0,0.25]
  int count = 0;    // M samples or E experts
};

// Rejects empty input, shape disagreement, and non-binary values.
UncertaintyMap pixelwise_stats(std::span<const Tensor> masks);

// The same statistic over the expert annotations of one sample.
UncertaintyMap gt_confidence_map(const MultiAnnotatedSample& sample);

}  // namespace flowseg
