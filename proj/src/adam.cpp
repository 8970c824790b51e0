#include "flowseg/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flowseg {

AdamState init_adam(const std::vector<Tensor>& params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor& p : params) {
    state.m.push_back(Tensor::zeros(p.shape));
    state.v.push_back(Tensor::zeros(p.shape));
  }
  return state;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double learning_rate) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: got " + std::to_string(params.size()) + " params, " +
                                std::to_string(grads.size()) + " grads, " +
                                std::to_string(state.m.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.m[i])) {
      throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(i) +
                                  ": param " + shape_str(params[i].shape) + ", grad " +
                                  shape_str(grads[i].shape));
    }
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::ArrayXd& m = state.m[i].data;
    Eigen::ArrayXd& v = state.v[i].data;
    const Eigen::ArrayXd& g = grads[i].data;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    params[i].data -= learning_rate * (m / bc1) / ((v / bc2).sqrt() + c.epsilon);
  }
}

}  // namespace flowseg
