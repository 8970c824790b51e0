#pragma once

#include "flowseg/autodiff.hpp"
#include "flowseg/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flowseg {

// Encoder-decoder velocity field u(t, S, X). Each stage is two 3x3 conv +
// SiLU blocks with the projected time embedding added as a per-channel bias
// between them; stages communicate through 2x average-pool / nearest-upsample
// and skip concatenation. Channel width doubles per level from base_width.
struct NetworkConfig {
  int mask_channels = 1;  // C_S
  int cond_channels = 1;  // C_X, zero-filled when the condition is dropped
  int image_size = 32;    // H = W
  int base_width = 16;
  int depth = 2;
  int time_embed_dim = 32;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

struct VelocityNetParams {
  NetworkConfig config;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  Eigen::Index total_count() const;
  bool all_finite() const;
};

struct TimeEmbedding {
  double t = 0.0;
  Tensor features;  // [time_embed_dim], sin half then cos half
};

// Sinusoidal features of t at geometrically spaced frequencies; the learned
// affine map on top of them lives in the network parameters.
TimeEmbedding time_embed(double t, int dim);

// Canonical parameter order: the name and shape of every tensor a valid
// parameter set must carry, derived from the config alone.
std::vector<std::pair<std::string, Shape>> param_layout(const NetworkConfig& config);

// Fan-in scaled uniform weights, zero biases, zero-initialized output head
// (training starts from the zero velocity field). Deterministic in seed.
VelocityNetParams init_params(const NetworkConfig& config, std::uint64_t seed);

std::vector<ad::Node*> bind_params(ad::Graph& graph, const VelocityNetParams& params,
                                   bool requires_grad);

// Graph-building forward pass. S is [B,C_S,H,W]; condition may be null, in
// which case the C_X condition channels are zero-filled (the null convention,
// so the absent-X and zero-X paths coincide bit for bit).
ad::Node* forward_node(ad::Graph& graph, std::span<ad::Node* const> params,
                       const NetworkConfig& config, double t, ad::Node* state,
                       ad::Node* condition);

// Inference conveniences over a throwaway graph.
Tensor forward(const VelocityNetParams& params, double t, const Tensor& state,
               const Tensor* condition);

// Classifier-free guided velocity u_c + w*(u_c - u_u). w == 0 evaluates only
// the conditional branch and returns it unchanged.
Tensor guided_velocity(const VelocityNetParams& params, double t, const Tensor& state,
                       const Tensor& condition, double w);

}  // namespace flowseg
