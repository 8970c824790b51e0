#pragma once

#include "flowseg/tensor.hpp"

#include <span>
#include <string>

namespace flowseg {

struct MetricsReport {
  double ged = 0.0;    // squared generalized energy distance, >= 0
  double s_ncc = 0.0;  // in [-1,1]
  double d_max = 0.0;  // in [0,1]
  double dice = 0.0;   // mean pairwise Dice, in [0,1]
  int num_pred = 0;    // M
  int num_gt = 0;      // E
};

// 2|a&b| / (|a|+|b|); two empty masks count as identical (1).
double dice(const Tensor& a, const Tensor& b);

// 1 - IoU; two empty masks are at distance 0.
double iou_distance(const Tensor& a, const Tensor& b);

// Squared generalized energy distance under the 1-IoU kernel,
// 2 E[d(S,Y)] - E[d(S,S')] - E[d(Y,Y')], clamped at zero. Within-set
// expectations run over all ordered pairs including i=j by default;
// include_self_pairs=false switches to the unbiased i!=j estimator.
double ged(std::span<const Tensor> pred, std::span<const Tensor> gt,
           bool include_self_pairs = true);

// Mean over ground-truth masks of the best Dice any prediction achieves
// against them (coverage of the annotation set; grows with more samples).
double d_max(std::span<const Tensor> pred, std::span<const Tensor> gt);

// Mean Dice over the full M x E cross product.
double mean_dice(std::span<const Tensor> pred, std::span<const Tensor> gt);

// Normalized cross-correlation between the pixel-wise variance maps of the
// two sets. Degenerate cases: both maps constant -> 1 if equal within 1e-12
// else 0; exactly one constant -> 0.
double s_ncc(std::span<const Tensor> pred, std::span<const Tensor> gt);

MetricsReport evaluate_sample_set(std::span<const Tensor> pred, std::span<const Tensor> gt);

std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& image_id, const MetricsReport& report);

}  // namespace flowseg
