#include "flowseg/finite_diff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flowseg {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& p,
                                  double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be > 0");
  Tensor probe = p;
  Tensor grad = Tensor::zeros(p.shape);
  for (Eigen::Index i = 0; i < p.numel(); ++i) {
    const double original = probe.data[i];
    probe.data[i] = original + h;
    const double fp = f(probe);
    probe.data[i] = original - h;
    const double fm = f(probe);
    probe.data[i] = original;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_difference_gradient: non-finite evaluation at coordinate " +
                               std::to_string(i));
    }
    grad.data[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace flowseg
