#include "flowseg/net.hpp"

#include "flowseg/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace flowseg {

namespace {

struct LayerSpec {
  std::string name;
  Shape shape;
  Eigen::Index fan_in;  // 0 = zero-initialized
};

Shape conv_shape(int out_ch, int in_ch) {
  return Shape{out_ch, in_ch, 3, 3};
}

// Single source of truth for parameter order; init_params and forward_node
// both walk this list.
std::vector<LayerSpec> layer_specs(const NetworkConfig& c) {
  std::vector<LayerSpec> specs;
  const int d = c.time_embed_dim;
  specs.push_back({"time.w", {d, d}, d});
  specs.push_back({"time.b", {d}, 0});

  auto stage = [&](const std::string& prefix, int in_ch, int ch) {
    specs.push_back({prefix + ".conv1.w", conv_shape(ch, in_ch), in_ch * 9});
    specs.push_back({prefix + ".conv1.b", {ch}, 0});
    specs.push_back({prefix + ".temb.w", {ch, d}, d});
    specs.push_back({prefix + ".temb.b", {ch}, 0});
    specs.push_back({prefix + ".conv2.w", conv_shape(ch, ch), ch * 9});
    specs.push_back({prefix + ".conv2.b", {ch}, 0});
  };

  auto width = [&](int level) { return c.base_width << level; };

  for (int k = 0; k < c.depth; ++k) {
    const int in_ch = k == 0 ? c.mask_channels + c.cond_channels : width(k - 1);
    stage("enc" + std::to_string(k), in_ch, width(k));
  }
  stage("mid", width(c.depth - 1), width(c.depth));
  for (int k = c.depth - 1; k >= 0; --k) {
    const int from_below = width(k + 1);
    stage("dec" + std::to_string(k), from_below + width(k), width(k));
  }
  specs.push_back({"head.w", conv_shape(c.mask_channels, c.base_width), 0});
  specs.push_back({"head.b", {c.mask_channels}, 0});
  return specs;
}

}  // namespace

void NetworkConfig::validate() const {
  if (mask_channels < 1) throw std::invalid_argument("NetworkConfig: mask_channels must be >= 1");
  if (cond_channels < 0) throw std::invalid_argument("NetworkConfig: cond_channels must be >= 0");
  if (base_width < 1 || depth < 1) {
    throw std::invalid_argument("NetworkConfig: base_width and depth must be >= 1");
  }
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw std::invalid_argument("NetworkConfig: time_embed_dim must be even and >= 2");
  }
  const int down = 1 << depth;
  if (image_size < down || image_size % down != 0) {
    throw std::invalid_argument("NetworkConfig: image_size " + std::to_string(image_size) +
                                " not divisible by 2^depth = " + std::to_string(down));
  }
}

std::vector<std::pair<std::string, Shape>> param_layout(const NetworkConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, Shape>> layout;
  for (const LayerSpec& spec : layer_specs(config)) layout.emplace_back(spec.name, spec.shape);
  return layout;
}

Eigen::Index VelocityNetParams::total_count() const {
  Eigen::Index n = 0;
  for (const Tensor& t : tensors) n += t.numel();
  return n;
}

bool VelocityNetParams::all_finite() const {
  for (const Tensor& t : tensors) {
    if (!t.all_finite()) return false;
  }
  return true;
}

TimeEmbedding time_embed(double t, int dim) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("time_embed: t must lie in [0,1], got " + std::to_string(t));
  }
  if (dim < 2 || dim % 2 != 0) {
    throw std::invalid_argument("time_embed: dim must be even and >= 2");
  }
  const int half = dim / 2;
  constexpr double freq_min = 1.0;
  constexpr double freq_max = 1000.0;
  Tensor features = Tensor::zeros({dim});
  for (int i = 0; i < half; ++i) {
    const double frac = half == 1 ? 0.0 : static_cast<double>(i) / (half - 1);
    const double freq = freq_min * std::pow(freq_max / freq_min, frac);
    features.data[i] = std::sin(freq * t);
    features.data[half + i] = std::cos(freq * t);
  }
  return TimeEmbedding{t, std::move(features)};
}

VelocityNetParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  VelocityNetParams params;
  params.config = config;
  for (const LayerSpec& spec : layer_specs(config)) {
    params.names.push_back(spec.name);
    if (spec.fan_in == 0) {
      params.tensors.push_back(Tensor::zeros(spec.shape));
    } else {
      const double bound = std::sqrt(3.0 / static_cast<double>(spec.fan_in));
      params.tensors.push_back(rand_uniform(spec.shape, rng, -bound, bound));
    }
  }
  return params;
}

std::vector<ad::Node*> bind_params(ad::Graph& graph, const VelocityNetParams& params,
                                   bool requires_grad) {
  std::vector<ad::Node*> nodes;
  nodes.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) nodes.push_back(graph.leaf(t, requires_grad));
  return nodes;
}

ad::Node* forward_node(ad::Graph& graph, std::span<ad::Node* const> params,
                       const NetworkConfig& config, double t, ad::Node* state,
                       ad::Node* condition) {
  config.validate();
  const Tensor& sv = state->value;
  if (sv.rank() != 4 || sv.dim(1) != config.mask_channels || sv.dim(2) != config.image_size ||
      sv.dim(3) != config.image_size) {
    throw std::invalid_argument("forward: state shape " + shape_str(sv.shape) +
                                " does not match config [B," + std::to_string(config.mask_channels) +
                                "," + std::to_string(config.image_size) + "," +
                                std::to_string(config.image_size) + "]");
  }
  const Eigen::Index batch = sv.dim(0);
  if (config.cond_channels > 0 && condition == nullptr) {
    condition = graph.leaf(
        Tensor::zeros({batch, config.cond_channels, config.image_size, config.image_size}));
  }
  if (config.cond_channels > 0) {
    const Tensor& cv = condition->value;
    if (cv.rank() != 4 || cv.dim(0) != batch || cv.dim(1) != config.cond_channels ||
        cv.dim(2) != config.image_size || cv.dim(3) != config.image_size) {
      throw std::invalid_argument("forward: condition shape " + shape_str(cv.shape) +
                                  " does not match state " + shape_str(sv.shape));
    }
  }

  std::size_t next = 0;
  auto take = [&]() { return params[next++]; };

  // learned affine on the sinusoidal time features, shared by all stages
  const int d = config.time_embed_dim;
  ad::Node* feat = graph.leaf(time_embed(t, d).features);
  ad::Node* time_w = take();
  ad::Node* time_b = take();
  ad::Node* temb =
      ad::add(ad::matmul(time_w, ad::reshape(feat, {d, 1})), ad::reshape(time_b, {d, 1}));

  auto stage = [&](ad::Node* x) {
    ad::Node* conv1_w = take();
    ad::Node* conv1_b = take();
    ad::Node* temb_w = take();
    ad::Node* temb_b = take();
    ad::Node* conv2_w = take();
    ad::Node* conv2_b = take();
    const Eigen::Index ch = conv1_w->value.dim(0);
    x = ad::silu(ad::channel_bias_add(ad::conv2d(x, conv1_w), conv1_b));
    ad::Node* bias =
        ad::reshape(ad::add(ad::matmul(temb_w, temb), ad::reshape(temb_b, {ch, 1})), {ch});
    x = ad::channel_bias_add(x, bias);
    return ad::silu(ad::channel_bias_add(ad::conv2d(x, conv2_w), conv2_b));
  };

  ad::Node* x = config.cond_channels > 0 ? ad::concat_channels(state, condition) : state;
  std::vector<ad::Node*> skips;
  for (int k = 0; k < config.depth; ++k) {
    x = stage(x);
    skips.push_back(x);
    x = ad::avg_pool2(x);
  }
  x = stage(x);
  for (int k = config.depth - 1; k >= 0; --k) {
    x = ad::upsample2(x);
    x = ad::concat_channels(x, skips[static_cast<std::size_t>(k)]);
    x = stage(x);
  }
  ad::Node* head_w = take();
  ad::Node* head_b = take();
  return ad::channel_bias_add(ad::conv2d(x, head_w), head_b);
}

Tensor forward(const VelocityNetParams& params, double t, const Tensor& state,
               const Tensor* condition) {
  ad::Graph graph;
  std::vector<ad::Node*> nodes = bind_params(graph, params, false);
  ad::Node* cond = condition ? graph.leaf(*condition) : nullptr;
  return forward_node(graph, nodes, params.config, t, graph.leaf(state), cond)->value;
}

Tensor guided_velocity(const VelocityNetParams& params, double t, const Tensor& state,
                       const Tensor& condition, double w) {
  Tensor conditional = forward(params, t, state, &condition);
  if (w == 0.0) return conditional;
  Tensor unconditional = forward(params, t, state, nullptr);
  conditional.data += w * (conditional.data - unconditional.data);
  return conditional;
}

}  // namespace flowseg
