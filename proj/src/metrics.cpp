#include "flowseg/metrics.hpp"

#include "flowseg/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace flowseg {

namespace {

void require_binary_pair(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
  }
  if (!a.is_binary() || !b.is_binary()) {
    throw std::invalid_argument(std::string(op) + ": masks must be binary");
  }
}

void require_sets(const char* op, std::span<const Tensor> pred, std::span<const Tensor> gt) {
  if (pred.empty() || gt.empty()) {
    throw std::invalid_argument(std::string(op) + ": mask sets must be nonempty");
  }
}

struct Overlap {
  double both = 0, a_only = 0, b_only = 0;
};

Overlap count_overlap(const Tensor& a, const Tensor& b) {
  Overlap o;
  for (Eigen::Index i = 0; i < a.numel(); ++i) {
    const bool av = a.data[i] != 0.0, bv = b.data[i] != 0.0;
    o.both += av && bv;
    o.a_only += av && !bv;
    o.b_only += !av && bv;
  }
  return o;
}

}  // namespace

double dice(const Tensor& a, const Tensor& b) {
  require_binary_pair("dice", a, b);
  const Overlap o = count_overlap(a, b);
  const double total = 2.0 * o.both + o.a_only + o.b_only;
  if (total == 0.0) return 1.0;  // both empty: identical
  return 2.0 * o.both / total;
}

double iou_distance(const Tensor& a, const Tensor& b) {
  require_binary_pair("iou_distance", a, b);
  const Overlap o = count_overlap(a, b);
  const double uni = o.both + o.a_only + o.b_only;
  if (uni == 0.0) return 0.0;  // both empty: distance zero
  return 1.0 - o.both / uni;
}

double ged(std::span<const Tensor> pred, std::span<const Tensor> gt, bool include_self_pairs) {
  require_sets("ged", pred, gt);
  const std::size_t m = pred.size(), e = gt.size();

  double cross = 0.0;
  for (const Tensor& s : pred) {
    for (const Tensor& y : gt) cross += iou_distance(s, y);
  }
  cross /= static_cast<double>(m * e);

  auto within = [include_self_pairs](std::span<const Tensor> set) {
    const std::size_t n = set.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!include_self_pairs && i == j) continue;
        sum += iou_distance(set[i], set[j]);
      }
    }
    const double pairs =
        include_self_pairs ? static_cast<double>(n * n) : static_cast<double>(n * (n - 1));
    return pairs == 0.0 ? 0.0 : sum / pairs;
  };

  return std::max(0.0, 2.0 * cross - within(pred) - within(gt));
}

double d_max(std::span<const Tensor> pred, std::span<const Tensor> gt) {
  require_sets("d_max", pred, gt);
  double sum = 0.0;
  for (const Tensor& y : gt) {
    double best = 0.0;
    for (const Tensor& s : pred) best = std::max(best, dice(s, y));
    sum += best;
  }
  return sum / static_cast<double>(gt.size());
}

double mean_dice(std::span<const Tensor> pred, std::span<const Tensor> gt) {
  require_sets("mean_dice", pred, gt);
  double sum = 0.0;
  for (const Tensor& s : pred) {
    for (const Tensor& y : gt) sum += dice(s, y);
  }
  return sum / static_cast<double>(pred.size() * gt.size());
}

double s_ncc(std::span<const Tensor> pred, std::span<const Tensor> gt) {
  require_sets("s_ncc", pred, gt);
  const Tensor u = pixelwise_stats(pred).variance;
  const Tensor v = pixelwise_stats(gt).variance;
  if (!u.same_shape(v)) {
    throw std::invalid_argument("s_ncc: variance maps have shapes " + shape_str(u.shape) + " vs " +
                                shape_str(v.shape));
  }
  const Eigen::Index n = u.numel();
  double mu = 0.0, mv = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    mu += u.data[i];
    mv += v.data[i];
  }
  mu /= static_cast<double>(n);
  mv /= static_cast<double>(n);

  double suu = 0.0, svv = 0.0, suv = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double du = u.data[i] - mu, dv = v.data[i] - mv;
    suu += du * du;
    svv += dv * dv;
    suv += du * dv;
  }
  const double sigma_u = std::sqrt(suu / static_cast<double>(n));
  const double sigma_v = std::sqrt(svv / static_cast<double>(n));

  constexpr double kConstantTol = 1e-12;
  const bool u_const = sigma_u <= kConstantTol;
  const bool v_const = sigma_v <= kConstantTol;
  if (u_const && v_const) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(u.data[i] - v.data[i]) > 1e-12) return 0.0;
    }
    return 1.0;
  }
  if (u_const || v_const) return 0.0;

  const double ncc = (suv / static_cast<double>(n)) / (sigma_u * sigma_v);
  return std::clamp(ncc, -1.0, 1.0);
}

MetricsReport evaluate_sample_set(std::span<const Tensor> pred, std::span<const Tensor> gt) {
  MetricsReport report;
  report.ged = ged(pred, gt);
  report.s_ncc = s_ncc(pred, gt);
  report.d_max = d_max(pred, gt);
  report.dice = mean_dice(pred, gt);
  report.num_pred = static_cast<int>(pred.size());
  report.num_gt = static_cast<int>(gt.size());
  return report;
}

std::string metrics_csv_header() {
  return "image_id,M,E,ged,s_ncc,d_max,dice";
}

std::string metrics_csv_row(const std::string& image_id, const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.17g,%.17g,%.17g,%.17g", image_id.c_str(), r.num_pred,
                r.num_gt, r.ged, r.s_ncc, r.d_max, r.dice);
  return buf;
}

}  // namespace flowseg
