#include "flowseg/sampler.hpp"

#include "flowseg/parallel.hpp"
#include "flowseg/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace flowseg {

IntegratorMethod integrator_method_from_string(const std::string& name) {
  if (name == "midpoint") return IntegratorMethod::midpoint;
  if (name == "euler") return IntegratorMethod::euler;
  throw std::invalid_argument("unknown integrator method '" + name + "'");
}

std::string to_string(IntegratorMethod method) {
  return method == IntegratorMethod::midpoint ? "midpoint" : "euler";
}

int IntegratorConfig::step_count() const {
  return static_cast<int>(std::lround(1.0 / step));
}

void IntegratorConfig::validate() const {
  if (!(step > 0.0 && step <= 1.0)) {
    throw std::invalid_argument("IntegratorConfig: step must lie in (0,1]");
  }
  const double n = std::lround(1.0 / step);
  if (n < 1 || std::abs(n * step - 1.0) > 1e-9) {
    throw std::invalid_argument("IntegratorConfig: 1/step must be an integer so the grid ends at t=1");
  }
  if (!std::isfinite(guidance) || !std::isfinite(threshold)) {
    throw std::invalid_argument("IntegratorConfig: guidance and threshold must be finite");
  }
}

Tensor integrate_field(const VelocityFn& field, Tensor state, const IntegratorConfig& config) {
  config.validate();
  const int steps = config.step_count();
  const double h = config.step;
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const Tensor k1 = field(t, state);
    if (config.method == IntegratorMethod::euler) {
      state.data += h * k1.data;
    } else {
      Tensor mid(state.shape, state.data + (h / 2.0) * k1.data);
      state.data += h * field(t + h / 2.0, mid).data;
    }
    if (!state.all_finite()) {
      throw std::runtime_error("integrate: non-finite state after step " + std::to_string(k) +
                               " (t = " + std::to_string(t) + ")");
    }
  }
  return state;
}

Tensor integrate(const VelocityNetParams& params, const Tensor& source, const Tensor& condition,
                 const IntegratorConfig& config) {
  return integrate_field(
      [&](double t, const Tensor& s) {
        return guided_velocity(params, t, s, condition, config.guidance);
      },
      source, config);
}

Tensor binarize(const Tensor& field, double threshold) {
  Tensor mask = Tensor::zeros(field.shape);
  mask.data = (field.data >= threshold).cast<double>();
  return mask;
}

SampleSet sample_many(const VelocityNetParams& params, const Tensor& condition, int num_samples,
                      const IntegratorConfig& config, std::uint64_t seed) {
  if (num_samples < 1) throw std::invalid_argument("sample_many: num_samples must be >= 1");
  config.validate();
  const NetworkConfig& net = params.config;
  if (condition.rank() != 3 || condition.dim(0) != net.cond_channels ||
      condition.dim(1) != net.image_size || condition.dim(2) != net.image_size) {
    throw std::invalid_argument("sample_many: condition shape " + shape_str(condition.shape) +
                                " does not match network config");
  }
  const Tensor batched_condition =
      condition.reshaped({1, net.cond_channels, net.image_size, net.image_size});

  SampleSet set;
  set.seed = seed;
  set.config = config;
  set.fields.resize(static_cast<std::size_t>(num_samples));
  set.masks.resize(static_cast<std::size_t>(num_samples));

  const Rng root(seed);
  parallel_for(num_samples, [&](int i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    Tensor source = randn({1, net.mask_channels, net.image_size, net.image_size}, rng);
    Tensor field;
    try {
      field = integrate(params, source, batched_condition, config);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("sample " + std::to_string(i) + ": " + e.what());
    }
    Tensor squeezed = field.reshaped({net.mask_channels, net.image_size, net.image_size});
    set.masks[static_cast<std::size_t>(i)] = binarize(squeezed, config.threshold);
    set.fields[static_cast<std::size_t>(i)] = std::move(squeezed);
  });
  return set;
}

}  // namespace flowseg
