#include "flowseg/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace flowseg {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainingConfig: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainingConfig: batch_size must be >= 1");
  if (iterations < 0) throw std::invalid_argument("TrainingConfig: iterations must be >= 0");
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) {
    throw std::invalid_argument("TrainingConfig: p_drop must lie in [0,1]");
  }
  if (!(t_epsilon >= 0.0 && t_epsilon < 1.0)) {
    throw std::invalid_argument("TrainingConfig: t_epsilon must lie in [0,1)");
  }
  if (loss_window < 1) throw std::invalid_argument("TrainingConfig: loss_window must be >= 1");
}

double LossHistory::moving_average(std::size_t first) const {
  const std::size_t w = static_cast<std::size_t>(window);
  if (first + w > values.size()) {
    throw std::invalid_argument("LossHistory: window [" + std::to_string(first) + "," +
                                std::to_string(first + w) + ") exceeds " +
                                std::to_string(values.size()) + " recorded losses");
  }
  double sum = 0.0;
  for (std::size_t i = first; i < first + w; ++i) sum += values[i];
  return sum / static_cast<double>(w);
}

double LossHistory::final_average() const {
  return moving_average(values.size() - static_cast<std::size_t>(window));
}

Tensor sample_path_point(const Tensor& source, const Tensor& target, double t) {
  if (!source.same_shape(target)) {
    throw std::invalid_argument("sample_path_point: shape mismatch " + shape_str(source.shape) +
                                " vs " + shape_str(target.shape));
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("sample_path_point: t must lie in [0,1]");
  }
  if (t == 0.0) return source;  // boundary exact by construction
  if (t == 1.0) return target;
  return Tensor(source.shape, (1.0 - t) * source.data + t * target.data);
}

Tensor target_velocity(const Tensor& source, const Tensor& target) {
  if (!source.same_shape(target)) {
    throw std::invalid_argument("target_velocity: shape mismatch " + shape_str(source.shape) +
                                " vs " + shape_str(target.shape));
  }
  return Tensor(source.shape, target.data - source.data);
}

double gaussian_path_logdensity(const Tensor& state, const Tensor& target, double t) {
  if (!state.same_shape(target)) {
    throw std::invalid_argument("gaussian_path_logdensity: shape mismatch " +
                                shape_str(state.shape) + " vs " + shape_str(target.shape));
  }
  if (!(t >= 0.0 && t < 1.0)) {
    throw std::invalid_argument(
        "gaussian_path_logdensity: t must lie in [0,1); the path is degenerate at t=1");
  }
  const double d = static_cast<double>(state.numel());
  const double sigma = 1.0 - t;
  const double sq = (state.data - t * target.data).square().sum();
  return -0.5 * d * std::log(2.0 * M_PI) - d * std::log(sigma) - sq / (2.0 * sigma * sigma);
}

CfmBatch draw_cfm_batch(std::span<const MultiAnnotatedSample> data, const NetworkConfig& net,
                        const TrainingConfig& config, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("draw_cfm_batch: dataset is empty");
  if (net.mask_channels != 1) {
    throw std::invalid_argument("draw_cfm_batch: expert masks are single-channel, config asks for " +
                                std::to_string(net.mask_channels));
  }
  const Eigen::Index h = net.image_size, w = net.image_size;

  CfmBatch batch;
  batch.elements.reserve(static_cast<std::size_t>(config.batch_size));
  for (int b = 0; b < config.batch_size; ++b) {
    const auto& sample = data[rng.below(data.size())];
    if (sample.image.rank() != 3 || sample.image.dim(0) != net.cond_channels ||
        sample.image.dim(1) != h || sample.image.dim(2) != w) {
      throw std::invalid_argument("draw_cfm_batch: sample " + sample.id + " image shape " +
                                  shape_str(sample.image.shape) + " does not match network config");
    }
    const Tensor& mask = sample.masks[rng.below(sample.masks.size())];
    if (mask.rank() != 2 || mask.dim(0) != h || mask.dim(1) != w) {
      throw std::invalid_argument("draw_cfm_batch: sample " + sample.id + " mask shape " +
                                  shape_str(mask.shape) + " does not match network config");
    }

    CfmElement element;
    element.t = rng.uniform() * (1.0 - config.t_epsilon);
    element.source = randn({1, 1, h, w}, rng);
    element.target = mask.reshaped({1, 1, h, w});
    element.condition = sample.image.reshaped({1, net.cond_channels, h, w});
    element.dropped = rng.uniform() < config.p_drop;
    batch.elements.push_back(std::move(element));
  }
  return batch;
}

ad::Node* cfm_loss_from_batch(ad::Graph& graph, std::span<ad::Node* const> params,
                              const NetworkConfig& net, const CfmBatch& batch) {
  if (batch.elements.empty()) throw std::invalid_argument("cfm_loss: batch is empty");

  ad::Node* total = nullptr;
  for (const CfmElement& element : batch.elements) {
    ad::Node* state = graph.leaf(sample_path_point(element.source, element.target, element.t));
    ad::Node* condition = element.dropped ? nullptr : graph.leaf(element.condition);
    ad::Node* u = forward_node(graph, params, net, element.t, state, condition);
    ad::Node* target = graph.leaf(target_velocity(element.source, element.target));
    ad::Node* diff = ad::add(u, ad::scalar_mul(target, -1.0));
    // ||diff||^2 as mean * numel
    ad::Node* sq = ad::scalar_mul(ad::mean_all(ad::square(diff)),
                                  static_cast<double>(diff->value.numel()));
    total = total ? ad::add(total, sq) : sq;
  }
  return ad::scalar_mul(total, 1.0 / static_cast<double>(batch.elements.size()));
}

ad::Node* cfm_loss(ad::Graph& graph, std::span<ad::Node* const> params, const NetworkConfig& net,
                   std::span<const MultiAnnotatedSample> data, const TrainingConfig& config,
                   Rng& rng) {
  const CfmBatch batch = draw_cfm_batch(data, net, config, rng);
  return cfm_loss_from_batch(graph, params, net, batch);
}

TrainResult train(std::span<const MultiAnnotatedSample> data, const NetworkConfig& net,
                  const TrainingConfig& config, const TrainCallback& progress) {
  net.validate();
  config.validate();
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");

  TrainResult result;
  result.params = init_params(net, config.seed);
  result.history.window = config.loss_window;
  result.history.values.reserve(static_cast<std::size_t>(config.iterations));

  AdamState adam = init_adam(result.params.tensors);
  Rng rng = Rng(config.seed).split(1);  // distinct stream from init_params

  for (int it = 0; it < config.iterations; ++it) {
    ad::Graph graph;
    std::vector<ad::Node*> param_nodes = bind_params(graph, result.params, true);
    ad::Node* loss = cfm_loss(graph, param_nodes, net, data, config, rng);
    const double loss_value = loss->value(0);
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(it));
    }
    graph.backward(loss);

    std::vector<Tensor> grads;
    grads.reserve(param_nodes.size());
    for (ad::Node* node : param_nodes) {
      grads.push_back(node->grad.numel() ? node->grad : Tensor::zeros(node->value.shape));
    }
    adam_step(result.params.tensors, grads, adam, config.learning_rate);

    result.history.values.push_back(loss_value);
    if (progress) progress(it, loss_value);
  }
  return result;
}

}  // namespace flowseg
