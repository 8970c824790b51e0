#include "flowseg/uncertainty.hpp"

#include <stdexcept>
#include <string>

namespace flowseg {

UncertaintyMap pixelwise_stats(std::span<const Tensor> masks) {
  if (masks.empty()) throw std::invalid_argument("pixelwise_stats: need at least one mask");
  const Tensor& first = masks.front();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!masks[i].same_shape(first)) {
      throw std::invalid_argument("pixelwise_stats: mask " + std::to_string(i) + " has shape " +
                                  shape_str(masks[i].shape) + ", expected " +
                                  shape_str(first.shape));
    }
    if (!masks[i].is_binary()) {
      throw std::invalid_argument("pixelwise_stats: mask " + std::to_string(i) +
                                  " contains values outside {0,1}");
    }
  }

  const double inv_m = 1.0 / static_cast<double>(masks.size());
  UncertaintyMap map;
  map.count = static_cast<int>(masks.size());
  map.mean = Tensor::zeros(first.shape);
  for (const Tensor& m : masks) map.mean.data += m.data;
  map.mean.data *= inv_m;

  map.variance = Tensor::zeros(first.shape);
  for (const Tensor& m : masks) map.variance.data += (m.data - map.mean.data).square();
  map.variance.data *= inv_m;
  return map;
}

UncertaintyMap gt_confidence_map(const MultiAnnotatedSample& sample) {
  return pixelwise_stats(sample.masks);
}

}  // namespace flowseg
