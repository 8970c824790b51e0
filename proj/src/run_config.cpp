#include "flowseg/run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <stdexcept>

namespace flowseg {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw std::invalid_argument("config: section '" + section + "' must be a JSON object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) known |= item.key() == key;
    if (!known) {
      throw std::invalid_argument("config: unknown key '" + item.key() + "' in section '" +
                                  section + "'");
    }
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void SamplingConfig::validate() const {
  if (num < 1) throw std::invalid_argument("SamplingConfig: num must be >= 1");
}

json to_json(const NetworkConfig& c) {
  return {{"mask_channels", c.mask_channels}, {"cond_channels", c.cond_channels},
          {"image_size", c.image_size},       {"base_width", c.base_width},
          {"depth", c.depth},                 {"time_embed_dim", c.time_embed_dim}};
}

json to_json(const TrainingConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"iterations", c.iterations},       {"p_drop", c.p_drop},
          {"seed", c.seed},                   {"t_epsilon", c.t_epsilon},
          {"loss_window", c.loss_window}};
}

json to_json(const IntegratorConfig& c) {
  return {{"method", to_string(c.method)},
          {"step", c.step},
          {"guidance", c.guidance},
          {"threshold", c.threshold}};
}

json to_json(const SynthConfig& c) {
  return {{"n_samples", c.n_samples}, {"size", c.size},
          {"annotators", c.annotators}, {"p_empty", c.p_empty},
          {"radius_jitter", c.radius_jitter}, {"noise", c.noise},
          {"seed", c.seed}};
}

json to_json(const SamplingConfig& c) {
  return {{"num", c.num}, {"seed", c.seed}};
}

json to_json(const RunConfig& c) {
  return {{"network", to_json(c.network)},
          {"training", to_json(c.training)},
          {"integrator", to_json(c.integrator)},
          {"synth", to_json(c.synth)},
          {"sampling", to_json(c.sampling)}};
}

NetworkConfig network_config_from_json(const json& j) {
  check_keys(j, "network", {"mask_channels", "cond_channels", "image_size", "base_width", "depth",
                            "time_embed_dim"});
  NetworkConfig c;
  maybe(j, "mask_channels", c.mask_channels);
  maybe(j, "cond_channels", c.cond_channels);
  maybe(j, "image_size", c.image_size);
  maybe(j, "base_width", c.base_width);
  maybe(j, "depth", c.depth);
  maybe(j, "time_embed_dim", c.time_embed_dim);
  return c;
}

TrainingConfig training_config_from_json(const json& j) {
  check_keys(j, "training", {"learning_rate", "batch_size", "iterations", "p_drop", "seed",
                             "t_epsilon", "loss_window"});
  TrainingConfig c;
  maybe(j, "learning_rate", c.learning_rate);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "iterations", c.iterations);
  maybe(j, "p_drop", c.p_drop);
  maybe(j, "seed", c.seed);
  maybe(j, "t_epsilon", c.t_epsilon);
  maybe(j, "loss_window", c.loss_window);
  return c;
}

namespace {

IntegratorConfig integrator_config_from_json(const json& j) {
  check_keys(j, "integrator", {"method", "step", "guidance", "threshold"});
  IntegratorConfig c;
  if (j.contains("method")) c.method = integrator_method_from_string(j.at("method").get<std::string>());
  maybe(j, "step", c.step);
  maybe(j, "guidance", c.guidance);
  maybe(j, "threshold", c.threshold);
  return c;
}

SynthConfig synth_config_from_json(const json& j) {
  check_keys(j, "synth", {"n_samples", "size", "annotators", "p_empty", "radius_jitter", "noise",
                          "seed"});
  SynthConfig c;
  maybe(j, "n_samples", c.n_samples);
  maybe(j, "size", c.size);
  maybe(j, "annotators", c.annotators);
  maybe(j, "p_empty", c.p_empty);
  maybe(j, "radius_jitter", c.radius_jitter);
  maybe(j, "noise", c.noise);
  maybe(j, "seed", c.seed);
  return c;
}

SamplingConfig sampling_config_from_json(const json& j) {
  check_keys(j, "sampling", {"num", "seed"});
  SamplingConfig c;
  maybe(j, "num", c.num);
  maybe(j, "seed", c.seed);
  return c;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  check_keys(j, "(top level)", {"network", "training", "integrator", "synth", "sampling"});
  RunConfig c;
  if (j.contains("network")) c.network = network_config_from_json(j.at("network"));
  if (j.contains("training")) c.training = training_config_from_json(j.at("training"));
  if (j.contains("integrator")) c.integrator = integrator_config_from_json(j.at("integrator"));
  if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
  if (j.contains("sampling")) c.sampling = sampling_config_from_json(j.at("sampling"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: malformed JSON in " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void write_resolved_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(config).dump(2) << "\n";
}

}  // namespace flowseg
