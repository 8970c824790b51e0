#pragma once

#include "flowseg/net.hpp"
#include "flowseg/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace flowseg {

enum class IntegratorMethod { midpoint, euler };

IntegratorMethod integrator_method_from_string(const std::string& name);
std::string to_string(IntegratorMethod method);

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::midpoint;
  double step = 0.01;      // uniform grid; 1/step must be an integer
  double guidance = 0.3;   // classifier-free guidance scale w
  double threshold = 0.5;  // binarization level

  int step_count() const;
  void validate() const;
  bool operator==(const IntegratorConfig&) const = default;
};

using VelocityFn = std::function<Tensor(double t, const Tensor& state)>;

// Fixed-step integration of dS/dt = u(t,S) from t=0 to t=1. Midpoint:
// S <- S + h*u(t + h/2, S + (h/2)*u(t,S)); Euler as the first-order
// cross-check. Throws naming the step index if the state goes non-finite.
Tensor integrate_field(const VelocityFn& field, Tensor state, const IntegratorConfig& config);

// Same, with the guided network velocity as the field.
Tensor integrate(const VelocityNetParams& params, const Tensor& source, const Tensor& condition,
                 const IntegratorConfig& config);

// pixel >= threshold -> 1, else 0
Tensor binarize(const Tensor& field, double threshold);

struct SampleSet {
  std::vector<Tensor> fields;  // continuous S_1, [C_S,H,W] each
  std::vector<Tensor> masks;   // binarized, same shapes
  std::uint64_t seed = 0;
  IntegratorConfig config;
};

// Sample i integrates the source Rng(seed).split(i) draws, so its output
// never depends on M or on evaluation order. Runs samples in parallel up to
// the FLOWSEG_THREADS cap.
SampleSet sample_many(const VelocityNetParams& params, const Tensor& condition, int num_samples,
                      const IntegratorConfig& config, std::uint64_t seed);

}  // namespace flowseg
