#pragma once

#include "flowseg/adam.hpp"
#include "flowseg/autodiff.hpp"
#include "flowseg/dataset.hpp"
#include "flowseg/net.hpp"
#include "flowseg/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace flowseg {

struct TrainingConfig {
  double learning_rate = 1e-4;
  int batch_size = 64;
  int iterations = 2000;
  double p_drop = 0.1;  // conditioning dropout probability
  std::uint64_t seed = 0;
  double t_epsilon = 1e-3;  // t ~ Uniform[0, 1 - t_epsilon]
  int loss_window = 100;

  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

struct LossHistory {
  std::vector<double> values;
  int window = 100;

  // mean of values[first, first+window)
  double moving_average(std::size_t first) const;
  double initial_average() const { return moving_average(0); }
  double final_average() const;
};

// One frozen training example: everything stochastic has already been drawn,
// so the loss is a pure function of the parameters (which is what the
// finite-difference oracle needs).
struct CfmElement {
  double t = 0.0;
  Tensor source;      // S_0 ~ N(0,I), [1,C_S,H,W]
  Tensor target;      // S^(e), the selected expert mask, [1,C_S,H,W]
  Tensor condition;   // X, [1,C_X,H,W]
  bool dropped = false;  // condition replaced by null for this element
};

struct CfmBatch {
  std::vector<CfmElement> elements;
};

// Linear interpolant S_t = (1-t) S0 + t Se.
Tensor sample_path_point(const Tensor& source, const Tensor& target, double t);

// Time derivative of the interpolant, Se - S0; constant in t.
Tensor target_velocity(const Tensor& source, const Tensor& target);

// log N(S; t*Se, (1-t)^2 I); rejects t = 1 where the path degenerates.
double gaussian_path_logdensity(const Tensor& state, const Tensor& target, double t);

// Per element, in this fixed order: sample index, expert index, t, source
// noise, dropout coin. All draws come from the one stream passed in, so a
// replay with an equal-state rng is exact.
CfmBatch draw_cfm_batch(std::span<const MultiAnnotatedSample> data, const NetworkConfig& net,
                        const TrainingConfig& config, Rng& rng);

// Mean over the batch of || u(t, S_t, X-or-null) - (Se - S0) ||^2.
ad::Node* cfm_loss_from_batch(ad::Graph& graph, std::span<ad::Node* const> params,
                              const NetworkConfig& net, const CfmBatch& batch);

ad::Node* cfm_loss(ad::Graph& graph, std::span<ad::Node* const> params, const NetworkConfig& net,
                   std::span<const MultiAnnotatedSample> data, const TrainingConfig& config,
                   Rng& rng);

struct TrainResult {
  VelocityNetParams params;
  LossHistory history;
};

using TrainCallback = std::function<void(int iteration, double loss)>;

// init_params(net, seed), then config.iterations rounds of
// draw batch -> loss -> backward -> adam step. Deterministic in the seed;
// throws std::runtime_error naming the iteration if the loss goes non-finite.
TrainResult train(std::span<const MultiAnnotatedSample> data, const NetworkConfig& net,
                  const TrainingConfig& config, const TrainCallback& progress = {});

}  // namespace flowseg
